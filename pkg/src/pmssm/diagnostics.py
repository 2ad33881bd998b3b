"""MCMC efficiency diagnostics and likelihood-correlation estimates."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .pfilter.engine import PFConfig, run_pf_batch
from .numerics import log_mean_exp
from .rngstore import BlockedStore, block_update, child_seeds, crn_update, draw_blocked

DEFAULT_MAX_LAG = 1000


def _as_chain(chain) -> np.ndarray:
    x = np.asarray(chain, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("chain is empty")
    if not np.isfinite(x).all():
        raise ValueError("chain contains non-finite values")
    return x


def acf(chain, max_lag: int) -> np.ndarray:
    """Biased sample autocorrelations at lags ``0..max_lag`` (``out[0] == 1``)."""
    x = _as_chain(chain)
    M = x.size
    max_lag = int(max_lag)
    if max_lag < 0 or M <= max_lag:
        raise ValueError(f"need more than {max_lag} draws, got {M}")
    x = x - x.mean()
    n_fft = 1 << int(np.ceil(np.log2(2 * M)))
    f = np.fft.rfft(x, n=n_fft)
    acov = np.fft.irfft(f * np.conj(f), n=n_fft)[: max_lag + 1] / M
    if not acov[0] > 0:
        raise ValueError("chain has zero variance; autocorrelations are undefined")
    return acov / acov[0]


def iact(chain, max_lag: int = DEFAULT_MAX_LAG, method: str = "fixed") -> float:
    """Integrated autocorrelation time.

    ``method="fixed"`` sums exactly ``max_lag`` autocorrelations:
    ``1 + 2 * sum_{t=1}^{max_lag} rho_t`` (needs more than ``max_lag + 1``
    draws).  ``method="ips"`` truncates at the first non-positive pair sum
    (Geyer's initial positive sequence), for sanity checks.
    """
    x = _as_chain(chain)
    if method == "fixed":
        if x.size <= max_lag + 1:
            raise ValueError(f"IACT with {max_lag} lags needs more than {max_lag + 1} draws, got {x.size}")
        rho = acf(x, max_lag)
        return float(1.0 + 2.0 * np.sum(rho[1:]))
    if method == "ips":
        rho = acf(x, x.size - 1)
        total = 0.0
        for k in range(0, rho.size - 1, 2):
            pair = rho[k] + rho[k + 1]
            if pair <= 0:
                break
            total += pair
        return float(2.0 * total - 1.0)
    raise ValueError("method must be 'fixed' or 'ips'")


@dataclass
class ChainDiagnostics:
    """Per-run efficiency summary; vectors follow ``param_names``."""

    param_names: list[str]
    iact_per_param: list[float]
    iact_mean: float
    accept_rate: float
    time_per_iter_s: float
    tnv: float
    rtnv: float
    post_mean: list[float]
    post_std: list[float]
    post_se: list[float]
    n_draws: int
    iact_unconstrained: Optional[list[float]] = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(
    chain,
    time_per_iter_s: float,
    benchmark: Optional[Union[ChainDiagnostics, float]] = None,
    *,
    accept_rate: float = float("nan"),
    param_names: Optional[Sequence[str]] = None,
    chain_unconstrained=None,
    max_lag: int = DEFAULT_MAX_LAG,
    allow_short: bool = False,
) -> ChainDiagnostics:
    """Summarise post-burn-in draws ``(M, d)`` given on the natural scale.

    ``benchmark`` is another run's diagnostics (or its TNV); without one the
    relative TNV is NaN.  With ``allow_short`` a chain too short for the
    fixed-lag IACT gets NaN for every IACT-derived quantity instead of an error.
    """
    draws = np.asarray(chain, dtype=np.float64)
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.size == 0:
        raise ValueError("chain is empty")
    M, d = draws.shape
    names = list(param_names) if param_names is not None else [f"theta{i}" for i in range(d)]
    short = allow_short and M <= max_lag + 1

    def tau(x):
        return float("nan") if short else iact(x, max_lag)

    iacts = [tau(draws[:, j]) for j in range(d)]
    iact_mean = float(np.mean(iacts))
    mean = draws.mean(axis=0)
    std = draws.std(axis=0, ddof=1) if M > 1 else np.zeros(d)
    se = std * np.sqrt(np.maximum(iacts, 0.0) / M) if not short else np.full(d, np.nan)
    tnv = iact_mean * float(time_per_iter_s)
    if benchmark is None:
        rtnv = float("nan")
    else:
        bench_tnv = benchmark.tnv if isinstance(benchmark, ChainDiagnostics) else float(benchmark)
        rtnv = tnv / bench_tnv
    unc = None
    if chain_unconstrained is not None:
        u = np.asarray(chain_unconstrained, dtype=np.float64).reshape(M, d)
        unc = [tau(u[:, j]) for j in range(d)]
    return ChainDiagnostics(
        param_names=names,
        iact_per_param=[float(v) for v in iacts],
        iact_mean=iact_mean,
        accept_rate=float(accept_rate),
        time_per_iter_s=float(time_per_iter_s),
        tnv=tnv,
        rtnv=rtnv,
        post_mean=mean.tolist(),
        post_std=std.tolist(),
        post_se=se.tolist(),
        n_draws=int(M),
        iact_unconstrained=unc,
    )


def pearson(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D arrays of equal length")
    if a.size < 3:
        raise ValueError("need at least 3 pairs")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("paired samples must be finite")
    return float(np.corrcoef(a, b)[0, 1])


def paired_log_liks(model, theta, y, cfg: PFConfig, relation, reps: int = 50, seed: int = 0, G: int = 1):
    """Pairs of log-likelihood estimates at a fixed parameter.

    ``relation`` says how the second estimate's random numbers relate to the
    first: ``"identical"``, ``"independent"``, a float ``rho`` (correlated
    refresh of every entry) or ``"block"`` (one uniformly chosen block out of
    ``G`` redrawn; estimates are block averages).
    """
    reps = int(reps)
    if reps < 3:
        raise ValueError("reps must be >= 3")
    T = np.asarray(y).shape[0]
    first, second = [], []
    for child in child_seeds(seed, reps):
        s_base, s_new, s_block = child_seeds(child, 3)
        base = draw_blocked(G, T, cfg.N, model.n_u, s_base, n_extra=model.n_extra)
        if relation == "identical":
            other = base
        elif relation == "independent":
            other = draw_blocked(G, T, cfg.N, model.n_u, s_new, n_extra=model.n_extra)
        elif relation == "block":
            k = int(np.random.default_rng(s_block).integers(G))
            other = block_update(base, k, s_new)
        elif isinstance(relation, (int, float)) and not isinstance(relation, bool):
            other = BlockedStore(tuple(crn_update(b, float(relation), c) for b, c in zip(base, child_seeds(s_new, G))))
        else:
            raise ValueError(f"unknown relation {relation!r}")
        ll = run_pf_batch(model, theta, y, list(base) + list(other), cfg).log_lik
        first.append(log_mean_exp(ll[:G]))
        second.append(log_mean_exp(ll[G:]))
    return np.array(first), np.array(second)


def estimate_rho_l(model, theta, y, cfg: PFConfig, relation, reps: int = 50, seed: int = 0, G: int = 1) -> float:
    """Pearson correlation of paired log-likelihood estimates (see :func:`paired_log_liks`)."""
    a, b = paired_log_liks(model, theta, y, cfg, relation, reps, seed, G)
    return pearson(a, b)
