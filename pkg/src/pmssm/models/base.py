"""State-space model abstraction in disturbance form.

A model maps standard-normal disturbances to states through a deterministic
transition ``x_t = k(u_t, x_{t-1})`` (and ``x_1 = kappa(u_1)``), and supplies
the observation log-density.  All methods are vectorised over arbitrary
leading axes: states have trailing shape ``(n_x,)``, disturbances
``(n_u,)`` and log-densities are returned with the trailing axis dropped.

Parameters are always passed on the unconstrained (sampling) scale as a
1-D array ``theta``; ``natural`` and ``unconstrain`` convert to and from the
model's natural parameterisation.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..errors import UnsupportedOperation

LOG_2PI = float(np.log(2.0 * np.pi))


def normal_logpdf(x, mean, var):
    """Elementwise log N(x; mean, var)."""
    r = x - mean
    return -0.5 * (LOG_2PI + np.log(var)) - 0.5 * r * r / var


def log_normal_prior(z, var):
    """log N(z; 0, var) for a scalar parameter on its sampling scale."""
    return -0.5 * (LOG_2PI + np.log(var)) - 0.5 * z * z / var


def log_inv_gamma_on_log_scale(z, a, b):
    """Log density of ``z = log v`` when ``v ~ IG(a, b)``, Jacobian included."""
    from scipy.special import gammaln

    return a * np.log(b) - gammaln(a) - a * z - b * np.exp(-z)


def log_uniform01_on_logit_scale(z):
    """Log density of ``z = logit c`` when ``c ~ U(0, 1)``."""
    # log c + log(1 - c) written stably in terms of z
    return -np.logaddexp(0.0, z) - np.logaddexp(0.0, -z)


def central_derivatives(fn, theta, h=1e-4):
    """Gradient and Hessian of a vector-valued ``fn(theta)`` by central differences.

    ``fn`` returns an array of shape ``S``; the results have shapes
    ``S + (d,)`` and ``S + (d, d)``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    d = theta.size
    f0 = np.asarray(fn(theta))
    eye = np.eye(d) * h
    plus = [np.asarray(fn(theta + eye[i])) for i in range(d)]
    minus = [np.asarray(fn(theta - eye[i])) for i in range(d)]
    grad = np.stack([(plus[i] - minus[i]) / (2 * h) for i in range(d)], axis=-1)
    hess = np.empty(f0.shape + (d, d))
    for i in range(d):
        hess[..., i, i] = (plus[i] - 2.0 * f0 + minus[i]) / (h * h)
        for j in range(i + 1, d):
            fpp = fn(theta + eye[i] + eye[j])
            fpm = fn(theta + eye[i] - eye[j])
            fmp = fn(theta - eye[i] + eye[j])
            fmm = fn(theta - eye[i] - eye[j])
            hij = (fpp - fpm - fmp + fmm) / (4 * h * h)
            hess[..., i, j] = hij
            hess[..., j, i] = hij
    return grad, hess


class StateSpaceModel:
    """Base class for the shipped models.

    Subclasses set the class attributes below and implement the
    ``initial``/``transition``/``log_obs``/``sample_obs`` maps.  Models that
    support the score/Hessian estimator also implement
    ``obs_derivatives`` and ``trans_derivatives`` and set
    ``has_derivatives``.
    """

    name: str = "model"
    n_x: int = 1
    n_u: int = 1
    n_y: int = 1
    # extra normals consumed only by the initial-state map
    n_extra: int = 0
    param_names: tuple[str, ...] = ()
    transition_is_tractable: bool = True
    has_derivatives: bool = False

    @property
    def theta_dim(self) -> int:
        return len(self.param_names)

    # -- parameterisation -------------------------------------------------------
    def natural(self, theta) -> dict[str, float]:
        raise NotImplementedError

    def unconstrain(self, natural: Mapping[str, float]) -> np.ndarray:
        raise NotImplementedError

    def natural_vector(self, theta) -> np.ndarray:
        nat = self.natural(theta)
        return np.array([nat[k] for k in self.param_names], dtype=np.float64)

    def natural_draws(self, thetas) -> np.ndarray:
        """Map an ``(M, d)`` array of unconstrained draws to the natural scale."""
        thetas = np.atleast_2d(np.asarray(thetas, dtype=np.float64))
        return np.array([self.natural_vector(t) for t in thetas])

    def log_prior(self, theta) -> float:
        raise NotImplementedError

    # -- dynamics ---------------------------------------------------------------
    def initial(self, theta, v):
        """``kappa``: map ``(..., n_u + n_extra)`` normals to an initial state."""
        raise NotImplementedError

    def transition(self, theta, x_prev, u, t: int):
        """``k(u_t, x_{t-1})`` for time index ``t`` (1-based)."""
        raise NotImplementedError

    def log_obs(self, theta, x, y, t: int):
        """``log f(y_t | x_t)``; ``y`` has shape ``(n_y,)``."""
        raise NotImplementedError

    def sample_obs(self, theta, x, t: int, rng: np.random.Generator):
        raise NotImplementedError

    # -- derivatives in theta (unconstrained scale) ------------------------------
    def obs_derivatives(self, theta, x, y, t: int):
        raise UnsupportedOperation(f"{self.name} does not provide derivatives")

    def trans_derivatives(self, theta, x_prev, x, t: int):
        """Derivatives of ``log g(x_t | x_{t-1})``; ``x_prev is None`` means ``log mu(x_1)``."""
        raise UnsupportedOperation(f"{self.name} does not provide derivatives")

    def describe(self) -> dict:
        return {"name": self.name}

    def __repr__(self):
        return f"{type(self).__name__}({self.describe()})"


def _check_theta(model: StateSpaceModel, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (model.theta_dim,):
        raise ValueError(f"theta must have shape ({model.theta_dim},), got {theta.shape}")
    return theta


def transition(model: StateSpaceModel, theta, x_prev, u, t: int):
    """Apply the model transition with argument validation."""
    theta = _check_theta(model, theta)
    x_prev = np.asarray(x_prev, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if u.shape[-1:] != (model.n_u,):
        raise ValueError(f"u must have trailing dimension {model.n_u}, got shape {u.shape}")
    if x_prev.shape[-1:] != (model.n_x,):
        raise ValueError(f"x_prev must have trailing dimension {model.n_x}, got shape {x_prev.shape}")
    return model.transition(theta, x_prev, u, int(t))


def log_obs(model: StateSpaceModel, theta, x, y, t: int):
    """Observation log-density with argument validation."""
    theta = _check_theta(model, theta)
    x = np.asarray(x, dtype=np.float64)
    y = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if not np.isfinite(y).all():
        raise ValueError("observation must be finite")
    if y.shape != (model.n_y,):
        raise ValueError(f"y must have shape ({model.n_y},), got {y.shape}")
    if x.shape[-1:] != (model.n_x,):
        raise ValueError(f"x must have trailing dimension {model.n_x}, got shape {x.shape}")
    out = model.log_obs(theta, x, y, int(t))
    return float(out) if np.ndim(out) == 0 else out


def simulate(model: StateSpaceModel, theta, T: int, seed: int):
    """Forward-simulate states ``(T, n_x)`` and observations ``(T, n_y)``."""
    theta = _check_theta(model, theta)
    if int(T) < 1:
        raise ValueError("T must be >= 1")
    rng = np.random.default_rng(seed)
    xs = np.empty((T, model.n_x))
    ys = np.empty((T, model.n_y))
    x = model.initial(theta, rng.standard_normal(model.n_u + model.n_extra))
    for t in range(1, T + 1):
        if t > 1:
            x = model.transition(theta, x, rng.standard_normal(model.n_u), t)
        xs[t - 1] = x
        ys[t - 1] = model.sample_obs(theta, x, t, rng)
    return xs, ys


def as_observations(model: StateSpaceModel, y) -> np.ndarray:
    """Coerce data to shape ``(T, n_y)`` and check it is finite."""
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1 and model.n_y == 1:
        y = y[:, None]
    if y.ndim != 2 or y.shape[1] != model.n_y:
        raise ValueError(f"observations must have shape (T, {model.n_y})")
    if not np.isfinite(y).all():
        raise ValueError("observations must be finite")
    return y
