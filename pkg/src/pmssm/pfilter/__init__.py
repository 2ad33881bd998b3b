"""Particle filtering on random-number stores."""

from .engine import (
    BatchResult,
    PFConfig,
    PFResult,
    estimate_score_hessian,
    run_pf,
    run_pf_batch,
    run_pf_conventional,
)
from .resampling import ess, systematic_resample
from .sorting import euclidean_sort, hilbert_sort

__all__ = [
    "BatchResult",
    "PFConfig",
    "PFResult",
    "estimate_score_hessian",
    "run_pf",
    "run_pf_batch",
    "run_pf_conventional",
    "ess",
    "systematic_resample",
    "euclidean_sort",
    "hilbert_sort",
]
