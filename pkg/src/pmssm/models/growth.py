"""Univariate nonstationary growth model.

    x_t = x_{t-1}/2 + 25 x_{t-1}/(1 + x_{t-1}^2) + 8 cos(1.2 t) + tau u_t
    y_t = x_t^2 / 20 + sigma e_t,          x_1 ~ N(0, 5)

Sampling scale ``(log tau2, log sigma2)``, each with a N(0, 50) prior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .base import LOG_2PI, StateSpaceModel, log_normal_prior

PRIOR_VAR = 50.0
INITIAL_VAR = 5.0


@dataclass(frozen=True)
class ThetaGrowth:
    tau2: float
    sigma2: float

    def __post_init__(self):
        if not (self.tau2 > 0 and self.sigma2 > 0):
            raise ValueError("tau2 and sigma2 must be positive")


def _gaussian_scale_derivs(resid, log_var):
    """Gradient/Hessian of log N(resid; 0, exp(log_var)) in ``log_var``."""
    q = resid * resid * np.exp(-log_var)
    return -0.5 + 0.5 * q, -0.5 * q


class Growth(StateSpaceModel):
    name = "growth"
    n_x = 1
    n_u = 1
    n_y = 1
    param_names = ("tau2", "sigma2")
    has_derivatives = True

    def natural(self, theta):
        return {"tau2": float(np.exp(theta[0])), "sigma2": float(np.exp(theta[1]))}

    def unconstrain(self, natural):
        if isinstance(natural, ThetaGrowth):
            natural = {"tau2": natural.tau2, "sigma2": natural.sigma2}
        ThetaGrowth(natural["tau2"], natural["sigma2"])
        return np.log([natural["tau2"], natural["sigma2"]]).astype(np.float64)

    def log_prior(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if not np.isfinite(theta).all():
            return -np.inf
        return float(log_normal_prior(theta[0], PRIOR_VAR) + log_normal_prior(theta[1], PRIOR_VAR))

    @staticmethod
    def drift(x_prev, t):
        forcing = 8.0 * math.cos(1.2 * t)
        return 0.5 * x_prev + 25.0 * x_prev / (1.0 + x_prev * x_prev) + forcing

    def initial(self, theta, v):
        return np.sqrt(INITIAL_VAR) * np.asarray(v, dtype=np.float64)[..., :1]

    def transition(self, theta, x_prev, u, t):
        return self.drift(x_prev, t) + np.exp(0.5 * theta[0]) * u

    def log_obs(self, theta, x, y, t):
        r = y[0] - x[..., 0] ** 2 / 20.0
        return -0.5 * (LOG_2PI + theta[1]) - 0.5 * r * r * np.exp(-theta[1])

    def sample_obs(self, theta, x, t, rng):
        return x[..., :1] ** 2 / 20.0 + np.exp(0.5 * theta[1]) * rng.standard_normal(1)

    def obs_derivatives(self, theta, x, y, t):
        g, h = _gaussian_scale_derivs(y[0] - x[..., 0] ** 2 / 20.0, theta[1])
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
        g, h = _gaussian_scale_derivs(x[..., 0] - self.drift(x_prev[..., 0], t), theta[0])
        grad[..., 0] = g
        hess[..., 0, 0] = h
        return grad, hess
