"""Systematic resampling and effective sample size."""

from __future__ import annotations

import numpy as np

from ._kernels import systematic_rows

_NORM_TOL = 1e-9


def _check_weights(W) -> np.ndarray:
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 1 or W.size == 0:
        raise ValueError("weights must be a non-empty 1-D array")
    if not np.isfinite(W).all() or (W < 0).any():
        raise ValueError("weights must be finite and non-negative")
    if abs(W.sum() - 1.0) > _NORM_TOL:
        raise ValueError(f"weights must sum to 1 (got {W.sum():.17g})")
    return W


def systematic_resample(W, u: float) -> np.ndarray:
    """Ancestor indices (0-based, nondecreasing) from one uniform ``u`` in (0, 1).

    Uses the grid ``(u + j) / N``, ``j = 0..N-1``, inverted through the
    cumulative weights.
    """
    W = _check_weights(W)
    u = float(u)
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    return systematic_rows(W[None, :], np.array([u]))[0].copy()


def ess(W) -> float:
    """Effective sample size ``1 / sum(W_i^2)`` of normalised weights."""
    W = _check_weights(W)
    return float(1.0 / np.dot(W, W))
