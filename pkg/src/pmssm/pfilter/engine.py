"""Bootstrap particle filter on the disturbance form of a state-space model.

Every random quantity is read from a :class:`RandomNumberStore`, so an
estimate is a deterministic function of ``(theta, y, store, config)``.  The
filter runs on a batch of ``B`` independent stores at once (arrays carry a
leading batch axis); each batch row is computed with the same operations
and reductions as when it runs alone, which keeps results bit-identical
whatever the batch size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..errors import EstimateCollapsed, UnsupportedOperation
from ..models.base import StateSpaceModel, as_observations
from ..rngstore import RandomNumberStore, normal_to_uniform, stack_blocks
from ._kernels import gather_rows, systematic_rows
from .sorting import euclidean_sort, hilbert_sort

SORTS = ("none", "euclidean", "hilbert")
SORT_SPACES = ("disturbance", "state")


@dataclass(frozen=True)
class PFConfig:
    """Particle-filter settings.

    Resampling happens every ``resample_every`` steps unless
    ``resample_threshold`` is given and ``sort`` is ``"none"``, in which case
    it is triggered when the effective sample size drops below the
    threshold.  No resampling is done after the last observation.
    """

    N: int
    resample_every: int = 1
    resample_threshold: Optional[float] = None
    sort: str = "none"
    sort_space: str = "disturbance"
    compute_derivatives: bool = False
    lam: float = 0.95
    hilbert_order: int = 16

    def __post_init__(self):
        if int(self.N) < 1:
            raise ValueError("N must be >= 1")
        if int(self.resample_every) < 1:
            raise ValueError("resample_every must be >= 1")
        if self.resample_threshold is not None and not (0 < self.resample_threshold <= self.N):
            raise ValueError("resample_threshold must lie in (0, N]")
        if self.sort not in SORTS:
            raise ValueError(f"sort must be one of {SORTS}")
        if self.sort_space not in SORT_SPACES:
            raise ValueError(f"sort_space must be one of {SORT_SPACES}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if int(self.hilbert_order) < 1:
            raise ValueError("hilbert_order must be >= 1")

    @property
    def ess_triggered(self) -> bool:
        return self.resample_threshold is not None and self.sort == "none"


@dataclass(frozen=True)
class PFResult:
    log_lik: float
    per_step_log_ratio: np.ndarray
    final_particles: np.ndarray
    final_weights: np.ndarray
    ancestry: np.ndarray
    score: Optional[np.ndarray] = None
    neg_hessian: Optional[np.ndarray] = None


@dataclass(frozen=True)
class BatchResult:
    """Outputs of ``B`` filter passes.  Collapsed rows have ``log_lik = -inf``
    and ``collapsed_at`` set to the (1-based) step; other rows have 0."""

    log_lik: np.ndarray
    per_step_log_ratio: np.ndarray
    final_particles: np.ndarray
    final_weights: np.ndarray
    ancestry: np.ndarray
    collapsed_at: np.ndarray
    score: Optional[np.ndarray] = None
    neg_hessian: Optional[np.ndarray] = None

    def row(self, b: int) -> PFResult:
        if self.collapsed_at[b]:
            raise EstimateCollapsed(int(self.collapsed_at[b]))
        return PFResult(
            log_lik=float(self.log_lik[b]),
            per_step_log_ratio=self.per_step_log_ratio[b],
            final_particles=self.final_particles[b],
            final_weights=self.final_weights[b],
            ancestry=self.ancestry[b],
            score=None if self.score is None else self.score[b],
            neg_hessian=None if self.neg_hessian is None else self.neg_hessian[b],
        )


def _reweight(logW, log_alpha, live):
    """Log of ``sum W * alpha`` per row plus the updated log and linear weights.

    Rows that are already dead, or whose every weight vanishes, get an
    increment of ``-inf`` and uniform weights.
    """
    a = logW + log_alpha
    nan = np.isnan(a)
    if nan.any():
        a[nan] = -np.inf
    mx = np.max(a, axis=1)
    ok = live & np.isfinite(mx)
    shift = np.where(ok, mx, 0.0)
    e = np.exp(a - shift[:, None])
    total = np.sum(e, axis=1)
    incr = np.where(ok, np.log(total) + shift, -np.inf)
    if ok.all():
        return incr, a - incr[:, None], e / total[:, None]
    N = a.shape[1]
    logW = np.where(ok[:, None], a - np.where(ok, incr, 0.0)[:, None], -np.log(N))
    W = np.where(ok[:, None], e / np.where(ok, total, 1.0)[:, None], 1.0 / N)
    return incr, logW, W


def _sort_rows(keys: np.ndarray, cfg: PFConfig) -> np.ndarray:
    perm = np.empty(keys.shape[:2], dtype=np.intp)
    for b in range(keys.shape[0]):
        if cfg.sort == "euclidean":
            perm[b] = euclidean_sort(keys[b])
        else:
            perm[b] = hilbert_sort(keys[b], cfg.hilbert_order)
    return perm


def _take(a: np.ndarray, idx: np.ndarray) -> np.ndarray:
    """``a[b, idx[b]]`` for every batch row."""
    return a[np.arange(a.shape[0])[:, None], idx]


def _check_store(model: StateSpaceModel, store: RandomNumberStore, T: int, cfg: PFConfig):
    expected = (T, cfg.N, model.n_u, model.n_extra)
    if store.shape != expected:
        raise ValueError(f"store shape {store.shape} does not match (T, N, n_u, n_extra) = {expected}")


def run_pf_batch(
    model: StateSpaceModel,
    theta,
    y,
    stores: Sequence[RandomNumberStore],
    cfg: PFConfig,
) -> BatchResult:
    """Run one filter per store at the same ``theta``; collapsed rows are flagged, not raised."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (model.theta_dim,):
        raise ValueError(f"theta must have shape ({model.theta_dim},)")
    y = as_observations(model, y)
    T = y.shape[0]
    stores = list(stores)
    if not stores:
        raise ValueError("need at least one store")
    for s in stores:
        _check_store(model, s, T, cfg)
    if cfg.compute_derivatives and not model.has_derivatives:
        raise UnsupportedOperation(f"{model.name} does not provide derivatives")
    if len(stores) == 1:
        s0 = stores[0]
        U, R, E = s0.proposal_normals[None], s0.resampling_normals[None], s0.initial_extra[None]
    else:
        U, R, E = stack_blocks(stores)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        return _filter(model, theta, y, U, R, E, cfg)


def _filter(model, theta, y, U, R, E, cfg: PFConfig) -> BatchResult:
    B, T, N = U.shape[0], U.shape[1], U.shape[2]
    log_n = np.log(N)
    ratios = np.zeros((B, T))
    ancestry = np.empty((B, T, N), dtype=np.intp)
    collapsed = np.zeros(B, dtype=np.int64)
    logW = np.full((B, N), -log_n)
    identity = np.broadcast_to(np.arange(N), (B, N))
    resample_uniforms = normal_to_uniform(R).reshape(B, T)

    deriv = cfg.compute_derivatives
    if deriv:
        d = model.theta_dim
        lam = cfg.lam
        h2 = 1.0 - lam * lam
        m = np.zeros((B, N, d))
        n = np.zeros((B, N, d, d))
        S = np.zeros((B, d))
        Bm = np.zeros((B, d, d))
        V = np.zeros((B, d, d))

    x = None
    x_parent = None
    parent = identity
    for t in range(1, T + 1):
        u_t = U[:, t - 1]
        if t == 1:
            v = np.concatenate([u_t, np.broadcast_to(E, (B, N, E.shape[2]))], axis=-1) if E.shape[2] else u_t
            x = model.initial(theta, v)
        else:
            x = model.transition(theta, x_parent, u_t, t)
        log_alpha = model.log_obs(theta, x, y[t - 1], t)
        ancestry[:, t - 1] = parent

        incr, logW, W = _reweight(logW, log_alpha, collapsed == 0)
        collapsed[(collapsed == 0) & ~np.isfinite(incr)] = t
        ratios[:, t - 1] = incr

        if deriv:
            if t > 1:
                # V_t accumulates the spread of the weighted system at t-1 (pre-resampling)
                V = V + spread_prev
            go, ho = model.obs_derivatives(theta, x, y[t - 1], t)
            gt, ht = model.trans_derivatives(theta, None if t == 1 else x_parent, x, t)
            m_par = _take(m, parent)
            n_par = _take(n, parent)
            m = lam * m_par + (1.0 - lam) * S[:, None, :] + go + gt
            n = lam * n_par + (1.0 - lam) * Bm[:, None, :, :] + ho + ht
            S = np.sum(W[:, :, None] * m, axis=1)
            Bm = np.sum(W[:, :, None, None] * n, axis=1)
            dev = m - S[:, None, :]
            spread_prev = np.sum(W[:, :, None, None] * (dev[:, :, :, None] * dev[:, :, None, :]), axis=1)

        if t == T:
            break
        if cfg.ess_triggered:
            do = 1.0 / np.sum(W * W, axis=1) < cfg.resample_threshold
        else:
            do = np.full(B, t % cfg.resample_every == 0)
        do &= collapsed == 0
        if not do.any():
            parent = identity
            x_parent = x
            continue

        uniforms = resample_uniforms[:, t - 1]
        if cfg.sort == "none":
            chosen = systematic_rows(W, uniforms)
        else:
            keys = u_t if cfg.sort_space == "disturbance" else x
            perm = _sort_rows(np.ascontiguousarray(keys), cfg)
            chosen = _take(perm, systematic_rows(_take(W, perm), uniforms))
        if do.all():
            parent = chosen
            logW = np.full((B, N), -log_n)
            W = np.full((B, N), 1.0 / N)
        else:
            parent = np.where(do[:, None], chosen, identity)
            logW = np.where(do[:, None], -log_n, logW)
            W = np.where(do[:, None], 1.0 / N, W)
        x_parent = gather_rows(np.ascontiguousarray(x, dtype=np.float64), np.ascontiguousarray(parent))

    out_score = out_hess = None
    if deriv:
        mm = np.sum(W[:, :, None, None] * (m[:, :, :, None] * m[:, :, None, :] + n), axis=1)
        sig = S[:, :, None] * S[:, None, :] - mm - h2 * V
        out_score = S
        out_hess = 0.5 * (sig + np.swapaxes(sig, 1, 2))
    logL = np.sum(ratios, axis=1)
    logL = np.where(collapsed == 0, logL, -np.inf)
    return BatchResult(
        log_lik=logL,
        per_step_log_ratio=ratios,
        final_particles=x,
        final_weights=W,
        ancestry=ancestry,
        collapsed_at=collapsed,
        score=out_score,
        neg_hessian=out_hess,
    )


def _single(model, theta, y, store, cfg, space):
    cfg = cfg if cfg.sort_space == space else _replace(cfg, sort_space=space)
    return run_pf_batch(model, theta, y, [store], cfg).row(0)


def _replace(cfg: PFConfig, **changes) -> PFConfig:
    from dataclasses import replace

    return replace(cfg, **changes)


def run_pf(model, theta, y, store: RandomNumberStore, cfg: PFConfig) -> PFResult:
    """Disturbance-form filter; sorting (if any) uses the current-step disturbances.

    Raises :class:`EstimateCollapsed` if every weight vanishes at some step.
    """
    return _single(model, theta, y, store, cfg, "disturbance")


def run_pf_conventional(model, theta, y, store: RandomNumberStore, cfg: PFConfig) -> PFResult:
    """State-space filter; sorting (if any) orders particles by their current states."""
    return _single(model, theta, y, store, cfg, "state")


def estimate_score_hessian(model, theta, y, store: RandomNumberStore, cfg: PFConfig):
    """Score and observed-information estimates ``(S, Sigma)`` from one pass."""
    if not model.has_derivatives:
        raise UnsupportedOperation(f"{model.name} does not provide derivatives")
    res = run_pf(model, theta, y, store, _replace(cfg, compute_derivatives=True))
    return res.score, res.neg_hessian
