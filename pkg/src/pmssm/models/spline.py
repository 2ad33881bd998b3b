"""Bivariate cubic spline (integrated random walk) model.

    x_t = F(delta) x_{t-1} + a_t,  a_t ~ N(0, tau2 U(delta))
    y_t = x_{1,t} + e_t,           e_t ~ N(0, sigma2)

with ``F = [[1, delta], [0, 1]]`` and ``U = [[delta^3/3, delta^2/2],
[delta^2/2, delta]]``.  The disturbance is mapped through the Cholesky
factor of ``U``.  Sampling scale ``(log tau2, log sigma2)`` with IG(1, 1)
priors on the natural scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import LOG_2PI, StateSpaceModel, log_inv_gamma_on_log_scale
from .growth import _gaussian_scale_derivs

IG_SHAPE = 1.0
IG_SCALE = 1.0


@dataclass(frozen=True)
class ThetaSpline:
    tau2: float
    sigma2: float

    def __post_init__(self):
        if not (self.tau2 > 0 and self.sigma2 > 0):
            raise ValueError("tau2 and sigma2 must be positive")


def noise_shape(delta: float) -> np.ndarray:
    d = float(delta)
    return np.array([[d**3 / 3.0, d**2 / 2.0], [d**2 / 2.0, d]])


class Spline(StateSpaceModel):
    name = "spline"
    n_x = 2
    n_u = 2
    n_y = 1
    param_names = ("tau2", "sigma2")
    has_derivatives = True

    def __init__(self, delta: float):
        if not delta > 0:
            raise ValueError("delta must be positive")
        self.delta = float(delta)
        self.U = noise_shape(self.delta)
        self.L = np.linalg.cholesky(self.U)
        self._logdet_U = 2.0 * float(np.sum(np.log(np.diag(self.L))))

    def describe(self):
        return {"name": self.name, "delta": self.delta}

    def natural(self, theta):
        return {"tau2": float(np.exp(theta[0])), "sigma2": float(np.exp(theta[1]))}

    def unconstrain(self, natural):
        if isinstance(natural, ThetaSpline):
            natural = {"tau2": natural.tau2, "sigma2": natural.sigma2}
        ThetaSpline(natural["tau2"], natural["sigma2"])
        return np.log([natural["tau2"], natural["sigma2"]]).astype(np.float64)

    def log_prior(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if not np.isfinite(theta).all():
            return -np.inf
        return float(
            log_inv_gamma_on_log_scale(theta[0], IG_SHAPE, IG_SCALE)
            + log_inv_gamma_on_log_scale(theta[1], IG_SHAPE, IG_SCALE)
        )

    def _mean(self, x_prev):
        out = np.empty_like(x_prev)
        out[..., 0] = x_prev[..., 0] + self.delta * x_prev[..., 1]
        out[..., 1] = x_prev[..., 1]
        return out

    def initial(self, theta, v):
        # x_1 ~ N(0, I), independent of theta
        return np.array(np.asarray(v, dtype=np.float64)[..., :2])

    def transition(self, theta, x_prev, u, t):
        tau = np.exp(0.5 * theta[0])
        L = self.L
        x_prev = np.asarray(x_prev, dtype=np.float64)
        out = np.empty(np.broadcast_shapes(x_prev.shape, u.shape))
        out[..., 0] = x_prev[..., 0] + self.delta * x_prev[..., 1] + tau * (L[0, 0] * u[..., 0])
        out[..., 1] = x_prev[..., 1] + tau * (L[1, 0] * u[..., 0] + L[1, 1] * u[..., 1])
        return out

    def log_obs(self, theta, x, y, t):
        r = y[0] - x[..., 0]
        return -0.5 * (LOG_2PI + theta[1]) - 0.5 * r * r * np.exp(-theta[1])

    def sample_obs(self, theta, x, t, rng):
        return x[..., :1] + np.exp(0.5 * theta[1]) * rng.standard_normal(1)

    def _whitened_sq(self, resid):
        L = self.L
        w0 = resid[..., 0] / L[0, 0]
        w1 = (resid[..., 1] - L[1, 0] * w0) / L[1, 1]
        return w0 * w0 + w1 * w1

    def obs_derivatives(self, theta, x, y, t):
        g, h = _gaussian_scale_derivs(y[0] - x[..., 0], theta[1])
        grad = np.zeros(g.shape + (2,))
        hess = np.zeros(g.shape + (2, 2))
        grad[..., 1] = g
        hess[..., 1, 1] = h
        return grad, hess

    def trans_derivatives(self, theta, x_prev, x, t):
        lead = x.shape[:-1]
        grad = np.zeros(lead + (2,))
        hess = np.zeros(lead + (2, 2))
        if x_prev is None:
            return grad, hess
        q = self._whitened_sq(x - self._mean(x_prev)) * np.exp(-theta[0])
        # two-dimensional Gaussian: d/dlog(tau2) of -log det(tau2 U)/2 is -1
        grad[..., 0] = -1.0 + 0.5 * q
        hess[..., 0, 0] = -0.5 * q
        return grad, hess
