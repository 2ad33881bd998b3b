"""Choosing the particle count from the variance of the log-likelihood estimator."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from ..diagnostics import estimate_rho_l
from ..pfilter.engine import PFConfig, run_pf_batch
from ..rngstore import child_seeds, draw_store

OPTIMAL_SD = 2.16
RHO_L_CAP = 0.999


def optimal_variance(rho_l: float) -> float:
    """``2.16**2 / (1 - rho_l**2)``."""
    rho_l = float(rho_l)
    if not -1.0 < rho_l < 1.0:
        raise ValueError("rho_l must lie in (-1, 1)")
    return OPTIMAL_SD**2 / (1.0 - rho_l * rho_l)


def block_correlation(G: int) -> float:
    """Log-likelihood correlation induced by refreshing one of ``G`` blocks."""
    if int(G) < 1:
        raise ValueError("G must be >= 1")
    return 1.0 - 1.0 / int(G)


def variance_target(method: str, G: Optional[int] = None, rho_l: Optional[float] = None) -> float:
    """Target ``Var(log L_hat)``: 1 for standard PM, the optimal value otherwise.

    For ``"cpm"`` pass the estimated ``rho_l``; for ``"bpm"`` pass ``G``.
    """
    if method == "pm":
        return 1.0
    if method == "cpm":
        if rho_l is None:
            raise ValueError("cpm target needs rho_l")
        return optimal_variance(min(max(float(rho_l), 0.0), RHO_L_CAP))
    if method == "bpm":
        if G is None:
            raise ValueError("bpm target needs G")
        return optimal_variance(block_correlation(G))
    raise ValueError(f"unknown method {method!r}")


@dataclass
class TuningResult:
    N: int
    var_hat: float
    rho_l_hat: float
    target: float
    converged: bool
    history: list = field(default_factory=list)


def log_lik_replicates(model, theta, y, cfg: PFConfig, reps: int, seed, chunk: int = 10) -> np.ndarray:
    """``reps`` independent log-likelihood estimates (``-inf`` where collapsed)."""
    T = np.asarray(y).shape[0]
    seeds = child_seeds(seed, reps)
    out = []
    for i in range(0, reps, chunk):
        stores = [draw_store(T, cfg.N, model.n_u, s, n_extra=model.n_extra) for s in seeds[i:i + chunk]]
        out.append(run_pf_batch(model, theta, y, stores, cfg).log_lik)
    return np.concatenate(out)


def _variance(ll: np.ndarray) -> float:
    return float(np.var(ll, ddof=1)) if np.isfinite(ll).all() else float("inf")


def tune_num_particles(
    model,
    theta_star,
    y,
    method: str = "pm",
    G: int = 12,
    rho: float = 0.9999,
    reps: int = 50,
    seed: int = 0,
    cfg: Optional[PFConfig] = None,
    N_init: int = 100,
    N_max: int = 20000,
    tol: float = 0.2,
    bpm_target: str = "share",
    max_evals: int = 16,
) -> TuningResult:
    """Search for ``N`` whose replicate ``Var(log L_hat)`` is within ``tol`` of the target.

    Targets: 1 for ``"pm"``; ``2.16**2 / (1 - rho_l**2)`` for ``"cpm"`` with
    ``rho_l`` re-estimated at each candidate from paired correlated
    replicates; for ``"bpm"`` the optimal value at ``rho_l = 1 - 1/G``,
    divided by ``G`` when ``bpm_target="share"`` (the per-filter share of
    the averaged estimator's budget) or used as-is with ``"literal"``.  The
    variance measured is always that of a single filter.

    The search starts from a ``1/N`` extrapolation and bisects geometrically
    once the target is bracketed.  If the target cannot be met within
    ``N_max`` the best candidate is returned with ``converged=False``.
    """
    if method not in ("pm", "cpm", "bpm"):
        raise ValueError(f"unknown method {method!r}")
    if bpm_target not in ("share", "literal"):
        raise ValueError("bpm_target must be 'share' or 'literal'")
    base = cfg or PFConfig(N=N_init)
    s_var, s_rho = child_seeds(seed, 2)
    history = []

    def evaluate(N):
        c = replace(base, N=int(N))
        var = _variance(log_lik_replicates(model, theta_star, y, c, reps, s_var))
        rho_l = float("nan")
        if method == "cpm":
            try:
                rho_l = estimate_rho_l(model, theta_star, y, c, float(rho), reps, s_rho)
            except ValueError:
                rho_l = 0.0
            target = variance_target("cpm", rho_l=rho_l)
        elif method == "bpm":
            rho_l = block_correlation(G)
            target = variance_target("bpm", G=G) / (G if bpm_target == "share" else 1)
        else:
            target = 1.0
        history.append((int(N), var, rho_l, target))
        return var, rho_l, target

    lo, hi = None, None  # lo: variance too high; hi: low enough
    N = max(1, int(N_init))
    best = None
    for _ in range(max_evals):
        var, rho_l, target = evaluate(N)
        ratio = var / target
        if best is None or abs(np.log(ratio)) < abs(np.log(best[1] / best[3])):
            best = (N, var, rho_l, target)
        if abs(ratio - 1.0) <= tol:
            return TuningResult(N, var, rho_l, target, True, history)
        if ratio > 1.0:
            lo = N if lo is None else max(lo, N)
        else:
            hi = N if hi is None else min(hi, N)
        if lo is not None and hi is not None:
            if hi - lo <= 1:
                break
            N_new = int(round(np.sqrt(lo * hi)))
            N_new = min(max(N_new, lo + 1), hi - 1)
        else:
            step = ratio if np.isfinite(ratio) else 16.0
            N_new = int(round(N * min(max(step, 1.0 / 16.0), 16.0)))
        N_new = min(max(N_new, 1), int(N_max))
        if N_new == N:
            break
        N = N_new
    N, var, rho_l, target = best
    warnings.warn(f"particle tuning did not reach the target {target:.4g}; best N={N} with variance {var:.4g}")
    return TuningResult(N, var, rho_l, target, False, history)
