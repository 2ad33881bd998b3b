"""Stochastic volatility model with an AR(P) log-volatility process.

State ``x_t = (v_t, ..., v_{t-P+1})`` in companion form,

    x_t = F x_{t-1} + tau * C * u_t,    y_t | x_t ~ N(0, exp(x_{1,t})),

with equal AR coefficients ``phi_i = phi / P``.  Sampling scale is
``(log phi, log tau2)`` with independent N(0, 50) priors; parameter values
with a non-stationary companion matrix get zero prior mass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_discrete_lyapunov

from .base import LOG_2PI, StateSpaceModel, central_derivatives, log_normal_prior

PRIOR_VAR = 50.0


@dataclass(frozen=True)
class ThetaSV:
    phi: float
    tau2: float

    def __post_init__(self):
        if not self.tau2 > 0:
            raise ValueError("tau2 must be positive")
        if not self.phi > 0:
            raise ValueError("phi must be positive (it is sampled on the log scale)")


def _matvec(M, v):
    """``M @ v`` over the trailing axis with a fixed summation order."""
    out = np.zeros(v.shape[:-1] + (M.shape[0],))
    for i in range(M.shape[0]):
        acc = out[..., i]
        for j in range(M.shape[1]):
            if M[i, j] != 0.0:
                acc = acc + M[i, j] * v[..., j]
        out[..., i] = acc
    return out


class StochasticVolatility(StateSpaceModel):
    """AR(P) stochastic volatility model (disturbance dimension 1)."""

    n_u = 1
    n_y = 1
    param_names = ("phi", "tau2")
    has_derivatives = True

    def __init__(self, order: int = 1):
        if int(order) < 1:
            raise ValueError("AR order must be >= 1")
        self.P = int(order)
        self.n_x = self.P
        self.n_extra = self.P - 1
        self.name = f"sv_ar{self.P}"

    def describe(self):
        return {"name": "sv", "order": self.P}

    # -- parameters ---------------------------------------------------------------
    def natural(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        return {"phi": float(np.exp(theta[0])), "tau2": float(np.exp(theta[1]))}

    def unconstrain(self, natural):
        if isinstance(natural, ThetaSV):
            natural = {"phi": natural.phi, "tau2": natural.tau2}
        ThetaSV(natural["phi"], natural["tau2"])
        return np.log([natural["phi"], natural["tau2"]]).astype(np.float64)

    def companion(self, phi: float) -> np.ndarray:
        P = self.P
        F = np.zeros((P, P))
        F[0, :] = phi / P
        if P > 1:
            F[1:, :-1] = np.eye(P - 1)
        return F

    def is_stationary(self, theta) -> bool:
        phi = float(np.exp(theta[0]))
        if self.P == 1:
            return phi < 1.0
        return bool(np.max(np.abs(np.linalg.eigvals(self.companion(phi)))) < 1.0)

    def log_prior(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if not np.isfinite(theta).all() or not self.is_stationary(theta):
            return -np.inf
        return float(log_normal_prior(theta[0], PRIOR_VAR) + log_normal_prior(theta[1], PRIOR_VAR))

    def stationary_cov(self, theta) -> np.ndarray:
        if not self.is_stationary(theta):
            raise ValueError("stationary distribution undefined: spectral radius of F >= 1")
        phi, tau2 = np.exp(theta[0]), np.exp(theta[1])
        if self.P == 1:
            return np.array([[tau2 / (1.0 - phi * phi)]])
        Q = np.zeros((self.P, self.P))
        Q[0, 0] = tau2
        S = solve_discrete_lyapunov(self.companion(phi), Q)
        return 0.5 * (S + S.T)

    # -- dynamics -----------------------------------------------------------------
    def initial(self, theta, v):
        L = np.linalg.cholesky(self.stationary_cov(theta))
        return _matvec(L, np.asarray(v, dtype=np.float64))

    def transition(self, theta, x_prev, u, t):
        phi, tau = np.exp(theta[0]), np.exp(0.5 * theta[1])
        x_prev = np.asarray(x_prev, dtype=np.float64)
        s = x_prev[..., 0]
        for j in range(1, self.P):
            s = s + x_prev[..., j]
        out = np.empty(np.broadcast_shapes(x_prev.shape, u.shape[:-1] + (self.P,)))
        out[..., 0] = (phi / self.P) * s + tau * u[..., 0]
        if self.P > 1:
            out[..., 1:] = x_prev[..., :-1]
        return out

    def log_obs(self, theta, x, y, t):
        h = x[..., 0]
        return -0.5 * (LOG_2PI + h) - 0.5 * y[0] * y[0] * np.exp(-h)

    def sample_obs(self, theta, x, t, rng):
        return np.exp(0.5 * x[..., :1]) * rng.standard_normal(1)

    # -- derivatives ----------------------------------------------------------------
    def obs_derivatives(self, theta, x, y, t):
        lead = x.shape[:-1]
        return np.zeros(lead + (2,)), np.zeros(lead + (2, 2))

    def _stationary_logpdf(self, theta, x):
        S = self.stationary_cov(theta)
        L = np.linalg.cholesky(S)
        z = np.linalg.solve(L, x.reshape(-1, self.P).T).T
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        lp = -0.5 * (self.P * LOG_2PI + logdet) - 0.5 * np.sum(z * z, axis=-1)
        return lp.reshape(x.shape[:-1])

    def trans_derivatives(self, theta, x_prev, x, t):
        theta = np.asarray(theta, dtype=np.float64)
        if x_prev is None:
            return central_derivatives(lambda th: self._stationary_logpdf(th, x), theta)
        phi, tau2 = np.exp(theta[0]), np.exp(theta[1])
        s = x_prev[..., 0]
        for j in range(1, self.P):
            s = s + x_prev[..., j]
        b = (phi / self.P) * s
        a = x[..., 0] - b
        g_phi = a * b / tau2
        g_tau = -0.5 + 0.5 * a * a / tau2
        grad = np.stack([g_phi, g_tau], axis=-1)
        hess = np.empty(a.shape + (2, 2))
        hess[..., 0, 0] = (a * b - b * b) / tau2
        hess[..., 0, 1] = -g_phi
        hess[..., 1, 0] = -g_phi
        hess[..., 1, 1] = -0.5 * a * a / tau2
        return grad, hess
