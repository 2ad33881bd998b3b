"""Stochastic Lotka-Volterra predator-prey model observed with Gaussian noise.

Reactions (prey ``x1``, predator ``x2``)::

    R1: x1 -> 2 x1          hazard c1 x1
    R2: x1 + x2 -> 2 x2     hazard c2 x1 x2
    R3: x2 -> 0             hazard c3 x2

The state is propagated over unit time by exact (Gillespie) simulation, so
the transition density is unavailable.  Each call to ``transition`` seeds a
private generator from the bits of the disturbance slab it is given, which
keeps a filter pass a deterministic function of its random-number store
even though the number of draws per step is not fixed.

Sampling scale ``(logit c1, logit c2, logit c3, log sigma2)`` with U(0, 1)
priors on each rate and an IG(1, 1) prior on ``sigma2``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from .base import (
    LOG_2PI,
    StateSpaceModel,
    log_inv_gamma_on_log_scale,
    log_uniform01_on_logit_scale,
)

STOICHIOMETRY = np.array([[1.0, -1.0, 0.0], [0.0, 1.0, -1.0]])
INITIAL_STATE = (100.0, 100.0)
# Particles still firing after this many events in one unit of time are
# treated as having exploded (state NaN, zero weight).
MAX_EVENTS_PER_STEP = 20000


@dataclass(frozen=True)
class ThetaLV:
    c: tuple[float, float, float]
    sigma2: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.c)
        if len(c) != 3 or not all(0.0 < v < 1.0 for v in c):
            raise ValueError("rate constants must lie in (0, 1)")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "c", c)


def hazards(x, c):
    """Reaction hazards for states ``(..., 2)``; returns ``(..., 3)``."""
    x1, x2 = x[..., 0], x[..., 1]
    return np.stack([c[0] * x1, c[1] * x1 * x2, c[2] * x2], axis=-1)


def gillespie_batch(c, x, dt, rng, max_events=MAX_EVENTS_PER_STEP):
    """Exact simulation of every row of ``x`` (shape ``(M, 2)``) over ``dt``.

    Rows are advanced in lockstep; each event consumes one exponential and
    one uniform per still-active row, in row order.
    """
    x = np.array(x, dtype=np.float64, copy=True)
    elapsed = np.zeros(x.shape[0])
    active = np.arange(x.shape[0])
    for _ in range(int(max_events)):
        if active.size == 0:
            return x
        h = hazards(x[active], c)
        h0 = h[:, 0] + h[:, 1] + h[:, 2]
        alive = h0 > 0.0
        active, h, h0 = active[alive], h[alive], h0[alive]
        if active.size == 0:
            return x
        wait = rng.standard_exponential(active.size) / h0
        pick = rng.random(active.size) * h0
        t_next = elapsed[active] + wait
        fires = t_next <= dt
        active, h, pick, t_next = active[fires], h[fires], pick[fires], t_next[fires]
        reaction = np.where(pick < h[:, 0], 0, np.where(pick < h[:, 0] + h[:, 1], 1, 2))
        x[active] += STOICHIOMETRY[:, reaction].T
        elapsed[active] = t_next
    if active.size:
        x[active] = np.nan
    return x


def gillespie_step(theta, x, dt, rng):
    """Advance one state ``(prey, predator)`` by ``dt`` time units.

    ``theta`` may be a :class:`ThetaLV` or a length-3 sequence of rates.
    """
    c = theta.c if isinstance(theta, ThetaLV) else tuple(float(v) for v in theta)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (2,) or (x < 0).any():
        raise ValueError("state must be a non-negative pair")
    if not dt > 0:
        raise ValueError("dt must be positive")
    out = gillespie_batch(c, x[None, :], dt, rng)[0]
    if np.isnan(out).any():
        raise FloatingPointError("event budget exhausted")
    return int(out[0]), int(out[1])


def gillespie_path(c, x, dt, rng):
    """Event times and states of one trajectory (single-row reference loop)."""
    x = [float(x[0]), float(x[1])]
    t = 0.0
    events = []
    while True:
        h = (c[0] * x[0], c[1] * x[0] * x[1], c[2] * x[1])
        h0 = h[0] + h[1] + h[2]
        if h0 <= 0.0:
            return events
        wait = rng.standard_exponential(1)[0] / h0
        pick = rng.random(1)[0] * h0
        if t + wait > dt:
            return events
        t += wait
        j = 0 if pick < h[0] else (1 if pick < h[0] + h[1] else 2)
        x[0] += STOICHIOMETRY[0, j]
        x[1] += STOICHIOMETRY[1, j]
        events.append((t, (x[0], x[1])))


def _slab_generator(u_row, t):
    words = np.ascontiguousarray(u_row, dtype=np.float64).view(np.uint32).ravel()
    return np.random.default_rng(np.random.SeedSequence(words.tolist() + [int(t)]))


class LotkaVolterra(StateSpaceModel):
    name = "lotka_volterra"
    n_x = 2
    n_u = 1
    n_y = 2
    param_names = ("c1", "c2", "c3", "sigma2")
    transition_is_tractable = False

    def __init__(self, dt: float = 1.0, max_events: int = MAX_EVENTS_PER_STEP):
        if not dt > 0:
            raise ValueError("dt must be positive")
        self.dt = float(dt)
        self.max_events = int(max_events)

    def describe(self):
        return {"name": self.name, "dt": self.dt}

    def natural(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        c = expit(theta[:3])
        return {"c1": float(c[0]), "c2": float(c[1]), "c3": float(c[2]), "sigma2": float(np.exp(theta[3]))}

    def unconstrain(self, natural):
        if isinstance(natural, ThetaLV):
            natural = {"c1": natural.c[0], "c2": natural.c[1], "c3": natural.c[2], "sigma2": natural.sigma2}
        ThetaLV((natural["c1"], natural["c2"], natural["c3"]), natural["sigma2"])
        c = logit([natural["c1"], natural["c2"], natural["c3"]])
        return np.concatenate([c, [np.log(natural["sigma2"])]]).astype(np.float64)

    def log_prior(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if not np.isfinite(theta).all():
            return -np.inf
        lp = float(np.sum(log_uniform01_on_logit_scale(theta[:3])))
        return lp + float(log_inv_gamma_on_log_scale(theta[3], 1.0, 1.0))

    def initial(self, theta, v):
        v = np.asarray(v)
        return np.broadcast_to(np.array(INITIAL_STATE), v.shape[:-1] + (2,)).copy()

    def transition(self, theta, x_prev, u, t):
        """Gillespie propagation; particles live on axis ``-2`` of ``u``.

        One generator is seeded per leading index from that slab of ``u``
        (a lone particle when ``u`` is 1-D).
        """
        c = expit(np.asarray(theta[:3], dtype=np.float64))
        u = np.asarray(u, dtype=np.float64)
        if u.ndim == 1:
            u_rows = u.reshape(1, 1, -1)
        else:
            u_rows = u.reshape((-1,) + u.shape[-2:])
        n_part = u_rows.shape[1]
        x_rows = np.broadcast_to(x_prev, u.shape[:-1] + (2,)).reshape(-1, n_part, 2)
        out = np.empty_like(x_rows)
        for r in range(u_rows.shape[0]):
            rng = _slab_generator(u_rows[r], t)
            out[r] = gillespie_batch(c, x_rows[r], self.dt, rng, self.max_events)
        return out.reshape(u.shape[:-1] + (2,))

    def log_obs(self, theta, x, y, t):
        s2 = np.exp(theta[3])
        r0 = y[0] - x[..., 0]
        r1 = y[1] - x[..., 1]
        lp = -(LOG_2PI + theta[3]) - 0.5 * (r0 * r0 + r1 * r1) / s2
        return np.where(np.isnan(lp), -np.inf, lp)

    def sample_obs(self, theta, x, t, rng):
        return x[..., :2] + np.exp(0.5 * theta[3]) * rng.standard_normal(2)
