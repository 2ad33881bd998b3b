"""Linear-Gaussian AR(1) model with an exact Kalman-filter likelihood.

    x_t = a x_{t-1} + sqrt(q) u_t,   y_t = x_t + sqrt(r) e_t,
    x_1 ~ N(0, q / (1 - a^2))  (N(0, q) when |a| >= 1).

Used as a ground truth for the particle filter.  Sampling scale is
``(a, log q, log r)`` with priors a ~ N(0, 1), log q, log r ~ N(0, 10).
"""

from __future__ import annotations

import numpy as np

from .base import LOG_2PI, StateSpaceModel, log_normal_prior


def initial_variance(a: float, q: float) -> float:
    return q / (1.0 - a * a) if abs(a) < 1.0 else q


def kalman_loglik(theta, y) -> float:
    """Exact ``log p(y_{1:T} | theta)`` by the Kalman recursion.

    ``theta`` is on the sampling scale ``(a, log q, log r)``.
    """
    a, q, r = float(theta[0]), float(np.exp(theta[1])), float(np.exp(theta[2]))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    mean, var = 0.0, initial_variance(a, q)
    total = 0.0
    for t, obs in enumerate(y):
        if t > 0:
            mean, var = a * mean, a * a * var + q
        s = var + r
        resid = obs - mean
        total += -0.5 * (LOG_2PI + np.log(s) + resid * resid / s)
        gain = var / s
        mean, var = mean + gain * resid, (1.0 - gain) * var
    return float(total)


class LinearGaussian(StateSpaceModel):
    name = "lg_oracle"
    n_x = 1
    n_u = 1
    n_y = 1
    param_names = ("a", "q", "r")
    has_derivatives = True

    def natural(self, theta):
        return {"a": float(theta[0]), "q": float(np.exp(theta[1])), "r": float(np.exp(theta[2]))}

    def unconstrain(self, natural):
        if not (natural["q"] > 0 and natural["r"] > 0):
            raise ValueError("q and r must be positive")
        return np.array([natural["a"], np.log(natural["q"]), np.log(natural["r"])], dtype=np.float64)

    def log_prior(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if not np.isfinite(theta).all():
            return -np.inf
        return float(
            log_normal_prior(theta[0], 1.0)
            + log_normal_prior(theta[1], 10.0)
            + log_normal_prior(theta[2], 10.0)
        )

    def loglik(self, theta, y) -> float:
        return kalman_loglik(theta, y)

    def initial(self, theta, v):
        var = initial_variance(float(theta[0]), float(np.exp(theta[1])))
        return np.sqrt(var) * np.asarray(v, dtype=np.float64)[..., :1]

    def transition(self, theta, x_prev, u, t):
        return theta[0] * x_prev + np.exp(0.5 * theta[1]) * u

    def log_obs(self, theta, x, y, t):
        e = y[0] - x[..., 0]
        return -0.5 * (LOG_2PI + theta[2]) - 0.5 * e * e * np.exp(-theta[2])

    def sample_obs(self, theta, x, t, rng):
        return x[..., :1] + np.exp(0.5 * theta[2]) * rng.standard_normal(1)

    def obs_derivatives(self, theta, x, y, t):
        e = y[0] - x[..., 0]
        k = e * e * np.exp(-theta[2])
        grad = np.zeros(e.shape + (3,))
        hess = np.zeros(e.shape + (3, 3))
        grad[..., 2] = -0.5 + 0.5 * k
        hess[..., 2, 2] = -0.5 * k
        return grad, hess

    def trans_derivatives(self, theta, x_prev, x, t):
        a, q = float(theta[0]), float(np.exp(theta[1]))
        lead = x.shape[:-1]
        grad = np.zeros(lead + (3,))
        hess = np.zeros(lead + (3, 3))
        if x_prev is None:
            x1 = x[..., 0]
            if abs(a) < 1.0:
                v = q / (1.0 - a * a)
                dv = 2.0 * a / (1.0 - a * a)
                ddv = 2.0 * (1.0 + a * a) / (1.0 - a * a) ** 2
            else:
                v, dv, ddv = q, 0.0, 0.0
            s = -0.5 + 0.5 * x1 * x1 / v
            k = -0.5 * x1 * x1 / v
            grad[..., 0] = s * dv
            grad[..., 1] = s
            hess[..., 0, 0] = k * dv * dv + s * ddv
            hess[..., 0, 1] = hess[..., 1, 0] = k * dv
            hess[..., 1, 1] = k
            return grad, hess
        xp = x_prev[..., 0]
        e = x[..., 0] - a * xp
        grad[..., 0] = e * xp / q
        grad[..., 1] = -0.5 + 0.5 * e * e / q
        hess[..., 0, 0] = -xp * xp / q
        hess[..., 0, 1] = hess[..., 1, 0] = -e * xp / q
        hess[..., 1, 1] = -0.5 * e * e / q
        return grad, hess
