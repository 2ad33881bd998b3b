"""Parameter proposals: adaptive random walk and a curvature-informed Gaussian."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from ..models.base import LOG_2PI

TARGET_ACCEPT = 0.23
# Robbins-Monro gain c0 / max(i, i0) ** GAIN_EXPONENT
GAIN_C0 = 1.0
GAIN_I0 = 10
GAIN_EXPONENT = 0.6
# weight (in pseudo-draws) given to the initial covariance when blending
COV_PRIOR_WEIGHT = 100.0
EIG_FLOOR_REL = 1e-6


@dataclass(frozen=True)
class ProposalState:
    """Proposal settings carried along a chain.

    ``empirical_cov`` blends the starting covariance with the running sample
    covariance of the chain; ``step_scale`` multiplies its Cholesky factor.
    For ``kind="gradient"`` the step scale multiplies the curvature-based
    covariance instead and is not adapted; the random-walk settings are
    still maintained for steps that fall back to it.
    """

    kind: str
    step_scale: float
    empirical_cov: np.ndarray
    adaptation_count: int = 0
    target_accept: float = TARGET_ACCEPT
    gradient_scale: float = 1.0
    initial_cov: Optional[np.ndarray] = None
    running_mean: Optional[np.ndarray] = None
    running_scatter: Optional[np.ndarray] = None
    n_draws: int = 0
    frozen: bool = False

    def __post_init__(self):
        if self.kind not in ("arw", "gradient"):
            raise ValueError("kind must be 'arw' or 'gradient'")
        if not (self.step_scale > 0 and np.isfinite(self.step_scale)):
            raise ValueError("step_scale must be positive")
        cov = np.array(self.empirical_cov, dtype=np.float64)
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
            raise ValueError("empirical_cov must be square")
        object.__setattr__(self, "empirical_cov", cov)
        if self.initial_cov is None:
            object.__setattr__(self, "initial_cov", cov.copy())

    @property
    def dim(self) -> int:
        return self.empirical_cov.shape[0]


def initial_proposal(dim: int, kind: str = "arw", cov=None, step_scale=None, gradient_scale=1.0):
    cov = np.eye(dim) * 0.01 if cov is None else np.asarray(cov, dtype=np.float64)
    if step_scale is None:
        step_scale = 2.38 / np.sqrt(dim)
    return ProposalState(kind=kind, step_scale=float(step_scale), empirical_cov=cov, gradient_scale=gradient_scale)


def _chol(cov: np.ndarray) -> np.ndarray:
    cov = 0.5 * (cov + cov.T)
    jitter = 0.0
    scale = max(float(np.max(np.abs(np.diag(cov)))), 1e-12)
    for _ in range(12):
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            jitter = scale * 1e-10 if jitter == 0.0 else jitter * 10.0
    raise np.linalg.LinAlgError("covariance could not be regularised")


def arw_propose(theta, proposal: ProposalState, rng: np.random.Generator) -> np.ndarray:
    """Symmetric Gaussian random-walk step ``theta + s * chol(C) z``."""
    theta = np.asarray(theta, dtype=np.float64)
    z = rng.standard_normal(theta.size)
    return theta + proposal.step_scale * (_chol(proposal.empirical_cov) @ z)


def arw_log_density(theta_to, theta_from, proposal: ProposalState) -> float:
    L = _chol(proposal.empirical_cov) * proposal.step_scale
    return _mvn_logpdf_chol(theta_to, theta_from, L)


def _mvn_logpdf_chol(x, mean, L) -> float:
    r = np.linalg.solve(L, np.asarray(x, dtype=np.float64) - mean)
    return float(-0.5 * (r.size * LOG_2PI + r @ r) - np.sum(np.log(np.diag(L))))


def regularize_information(neg_hessian) -> Optional[np.ndarray]:
    """Symmetrise and floor the eigenvalues of an information estimate.

    Returns ``None`` if the largest eigenvalue is not positive and finite.
    """
    M = np.asarray(neg_hessian, dtype=np.float64)
    if not np.isfinite(M).all():
        return None
    M = 0.5 * (M + M.T)
    w, V = np.linalg.eigh(M)
    top = float(w[-1])
    if not (np.isfinite(top) and top > 0.0):
        return None
    floor = EIG_FLOOR_REL * max(top, 1e-6)
    w = np.maximum(w, floor)
    return (V * w) @ V.T


def gradient_moments(theta, score, neg_hessian, scale: float = 1.0):
    """Mean and covariance of ``N(theta + s^2/2 Sigma^-1 S, s^2 Sigma^-1)``, or ``None``."""
    if score is None or neg_hessian is None:
        return None
    score = np.asarray(score, dtype=np.float64)
    if not np.isfinite(score).all():
        return None
    info = regularize_information(neg_hessian)
    if info is None:
        return None
    w, V = np.linalg.eigh(info)
    cov = (V / w) @ V.T
    cov = 0.5 * (cov + cov.T)
    s2 = scale * scale
    mean = np.asarray(theta, dtype=np.float64) + 0.5 * s2 * (cov @ score)
    return mean, s2 * cov


def gradient_propose(theta, score, neg_hessian, rng: np.random.Generator, scale: float = 1.0):
    """Draw from the curvature-informed Gaussian; returns ``(theta_p, log_q_forward)``.

    Raises ``numpy.linalg.LinAlgError`` when the information estimate cannot
    be made positive definite (the caller falls back to the random walk).
    """
    mom = gradient_moments(theta, score, neg_hessian, scale)
    if mom is None:
        raise np.linalg.LinAlgError("information estimate is not usable")
    mean, cov = mom
    L = _chol(cov)
    theta_p = mean + L @ rng.standard_normal(mean.size)
    return theta_p, _mvn_logpdf_chol(theta_p, mean, L)


def gradient_log_density(theta_to, moments) -> float:
    mean, cov = moments
    return _mvn_logpdf_chol(theta_to, mean, _chol(cov))


def robbins_monro_update(proposal: ProposalState, alpha_observed: float, theta=None) -> ProposalState:
    """One adaptation step of the random-walk scale (and covariance if ``theta`` given).

    ``log s += gamma_i * (alpha - target)`` with ``gamma_i = 1 / max(i, 10)**0.6``.
    A frozen proposal is returned unchanged.
    """
    if proposal.frozen:
        return proposal
    a = float(alpha_observed)
    if not 0.0 <= a <= 1.0:
        raise ValueError("alpha_observed must lie in [0, 1]")
    i = proposal.adaptation_count + 1
    gain = GAIN_C0 / max(i, GAIN_I0) ** GAIN_EXPONENT
    scale = float(np.exp(np.log(proposal.step_scale) + gain * (a - proposal.target_accept)))
    changes = {"step_scale": scale, "adaptation_count": i}
    if theta is not None:
        theta = np.asarray(theta, dtype=np.float64)
        n = proposal.n_draws + 1
        if proposal.running_mean is None:
            mean = theta.copy()
            scatter = np.zeros((theta.size, theta.size))
        else:
            delta = theta - proposal.running_mean
            mean = proposal.running_mean + delta / n
            scatter = proposal.running_scatter + np.outer(delta, theta - mean)
        w0 = COV_PRIOR_WEIGHT
        cov = (w0 * proposal.initial_cov + scatter) / (w0 + n)
        changes.update(running_mean=mean, running_scatter=scatter, n_draws=n, empirical_cov=cov)
    return replace(proposal, **changes)


def freeze(proposal: ProposalState) -> ProposalState:
    return replace(proposal, frozen=True)
