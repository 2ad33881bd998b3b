"""Small numerical helpers shared across modules."""

from __future__ import annotations

import numpy as np


def log_mean_exp(values) -> float:
    """``log(mean(exp(values)))`` with a fixed left-to-right summation order."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ValueError("need at least one value")
    mx = float(np.max(v))
    if np.isnan(mx):
        raise ValueError("values must not be NaN")
    if not np.isfinite(mx):
        return mx
    total = 0.0
    for a in v:
        total += float(np.exp(a - mx))
    return mx + float(np.log(total)) - float(np.log(v.size))
