"""Metropolis-Hastings kernels on the extended (parameter, random numbers) target."""

from __future__ import annotations

from concurrent.futures import Executor
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Union

import numpy as np

from ..errors import EstimateCollapsed
from ..numerics import log_mean_exp
from ..pfilter.engine import PFConfig, run_pf_batch
from ..rngstore import (
    BlockedStore,
    RandomNumberStore,
    block_update,
    child_seeds,
    choose_block,
    crn_update,
    draw_blocked,
    draw_store,
)
from .proposals import (
    ProposalState,
    arw_log_density,
    arw_propose,
    gradient_log_density,
    gradient_moments,
)

SeedLike = Union[int, np.random.SeedSequence]


@dataclass(frozen=True)
class ChainState:
    """Current point of the chain together with everything its estimate depends on.

    ``log_lik`` is the log of the (block-averaged) likelihood estimate at
    ``(theta, stores)``; for a blocked store the per-block values are kept in
    ``block_log_liks``.  ``score`` and ``neg_hessian`` are present when the
    filter computed derivatives.
    """

    theta: np.ndarray
    log_lik: float
    log_prior: float
    stores: Union[RandomNumberStore, BlockedStore]
    block_log_liks: Optional[np.ndarray] = None
    score: Optional[np.ndarray] = None
    neg_hessian: Optional[np.ndarray] = None


class StepOutcome(NamedTuple):
    state: ChainState
    accepted: bool
    alpha: float
    block: int
    used_fallback: bool


def evaluate_blocks(model, theta, y, stores, cfg: PFConfig, executor: Optional[Executor] = None, workers: int = 1):
    """Filter every store at ``theta``; returns ``(log_liks, scores, neg_hessians)``.

    With an executor, contiguous chunks of stores are filtered concurrently
    and results are reassembled in store order.
    """
    stores = list(stores)
    G = len(stores)
    workers = max(1, min(int(workers), G))
    if executor is None or workers == 1:
        res = [run_pf_batch(model, theta, y, stores, cfg)]
    else:
        bounds = np.linspace(0, G, workers + 1).round().astype(int)
        chunks = [stores[bounds[i]:bounds[i + 1]] for i in range(workers) if bounds[i + 1] > bounds[i]]
        futures = [executor.submit(run_pf_batch, model, theta, y, c, cfg) for c in chunks]
        res = [f.result() for f in futures]
    ll = np.concatenate([r.log_lik for r in res])
    if not cfg.compute_derivatives:
        return ll, None, None
    return ll, np.concatenate([r.score for r in res]), np.concatenate([r.neg_hessian for r in res])


def _combine_derivatives(ll, scores, hessians):
    """Block-averaged derivative estimates over the non-collapsed blocks."""
    if scores is None:
        return None, None
    ok = np.isfinite(ll)
    if not ok.any():
        return None, None
    return np.mean(scores[ok], axis=0), np.mean(hessians[ok], axis=0)


def _pf_config(cfg: PFConfig, proposal: ProposalState) -> PFConfig:
    want = proposal.kind == "gradient"
    return cfg if cfg.compute_derivatives == want else replace(cfg, compute_derivatives=want)


def initial_state(
    model,
    theta,
    y,
    cfg: PFConfig,
    seed: SeedLike,
    G: Optional[int] = None,
    proposal: Optional[ProposalState] = None,
    executor: Optional[Executor] = None,
    workers: int = 1,
) -> ChainState:
    """Draw fresh random numbers and evaluate the estimate at ``theta``.

    ``G=None`` gives a single store (PM/CPM); an integer gives a blocked store.
    Raises :class:`EstimateCollapsed` if the starting estimate is zero.
    """
    theta = np.asarray(theta, dtype=np.float64)
    lp = model.log_prior(theta)
    if not np.isfinite(lp):
        raise ValueError("starting parameter has zero prior density")
    if proposal is not None:
        cfg = _pf_config(cfg, proposal)
    T = np.asarray(y).shape[0]
    if G is None:
        # same stream as block 0 of a blocked store, so G = 1 chains coincide
        stores = draw_store(T, cfg.N, model.n_u, child_seeds(seed, 1)[0], n_extra=model.n_extra)
        blocks = [stores]
    else:
        stores = draw_blocked(G, T, cfg.N, model.n_u, seed, n_extra=model.n_extra)
        blocks = list(stores)
    ll, sc, hs = evaluate_blocks(model, theta, y, blocks, cfg, executor, workers)
    if G is None:
        if not np.isfinite(ll[0]):
            raise EstimateCollapsed(1, "likelihood estimate at the starting point is zero")
        score = None if sc is None else sc[0]
        hess = None if hs is None else hs[0]
        return ChainState(theta, float(ll[0]), float(lp), stores, None, score, hess)
    total = log_mean_exp(ll)
    if not np.isfinite(total):
        raise EstimateCollapsed(1, "likelihood estimate at the starting point is zero")
    score, hess = _combine_derivatives(ll, sc, hs)
    return ChainState(theta, total, float(lp), stores, ll, score, hess)


def _propose_theta(state: ChainState, proposal: ProposalState, rng):
    """Returns ``(theta_p, log_q_forward, forward_moments, used_fallback)``.

    ``forward_moments`` is ``None`` for a random-walk move (symmetric).
    """
    if proposal.kind == "gradient":
        mom = gradient_moments(state.theta, state.score, state.neg_hessian, proposal.gradient_scale)
        if mom is not None:
            mean, cov = mom
            theta_p = mean + np.linalg.cholesky(cov) @ rng.standard_normal(mean.size)
            return theta_p, gradient_log_density(theta_p, mom), mom, False
        return arw_propose(state.theta, proposal, rng), None, None, True
    return arw_propose(state.theta, proposal, rng), None, None, False


def _log_q_ratio(state, theta_p, score_p, hess_p, proposal, log_q_fwd, fwd_mom) -> float:
    """``log q(theta_c | theta_p) - log q(theta_p | theta_c)``."""
    if proposal.kind != "gradient":
        return 0.0
    rev_mom = gradient_moments(theta_p, score_p, hess_p, proposal.gradient_scale)
    if fwd_mom is None and rev_mom is None:
        return 0.0
    if fwd_mom is None:
        log_q_fwd = arw_log_density(theta_p, state.theta, proposal)
    if rev_mom is None:
        log_q_rev = arw_log_density(state.theta, theta_p, proposal)
    else:
        log_q_rev = gradient_log_density(state.theta, rev_mom)
    return log_q_rev - log_q_fwd


def _accept(log_ratio: float, seed) -> tuple[bool, float]:
    if not np.isfinite(log_ratio):
        log_ratio = -np.inf if np.isnan(log_ratio) or log_ratio < 0 else 0.0
    alpha = float(np.exp(min(0.0, log_ratio)))
    u = np.random.default_rng(seed).random()
    return bool(u < alpha), alpha


def pm_step(state: ChainState, model, y, cfg: PFConfig, proposal: ProposalState, rho: float, seed: SeedLike) -> StepOutcome:
    """One (correlated) pseudo-marginal step; ``rho = 0`` is the standard kernel.

    The random numbers are proposed with the autoregressive rule of
    :func:`crn_update`.  A collapsed or prior-excluded proposal is rejected
    with ``alpha = 0``.
    """
    if not isinstance(state.stores, RandomNumberStore):
        raise ValueError("pm_step needs a single random-number store")
    s_theta, s_store, s_accept, _ = child_seeds(seed, 4)
    cfg = _pf_config(cfg, proposal)
    theta_p, log_q_fwd, fwd_mom, fallback = _propose_theta(state, proposal, np.random.default_rng(s_theta))
    store_p = crn_update(state.stores, rho, s_store)
    lp_p = model.log_prior(theta_p)
    if not np.isfinite(lp_p):
        return StepOutcome(state, False, 0.0, 0, fallback)
    res = run_pf_batch(model, theta_p, y, [store_p], cfg)
    ll_p = float(res.log_lik[0])
    if not np.isfinite(ll_p):
        return StepOutcome(state, False, 0.0, 0, fallback)
    score_p = None if res.score is None else res.score[0]
    hess_p = None if res.neg_hessian is None else res.neg_hessian[0]
    log_ratio = ll_p + lp_p - state.log_lik - state.log_prior
    log_ratio += _log_q_ratio(state, theta_p, score_p, hess_p, proposal, log_q_fwd, fwd_mom)
    accepted, alpha = _accept(log_ratio, s_accept)
    if not accepted:
        return StepOutcome(state, False, alpha, 0, fallback)
    new = ChainState(np.asarray(theta_p), ll_p, float(lp_p), store_p, None, score_p, hess_p)
    return StepOutcome(new, True, alpha, 0, fallback)


def bpm_step(
    state: ChainState,
    model,
    y,
    cfg: PFConfig,
    proposal: ProposalState,
    seed: SeedLike,
    executor: Optional[Executor] = None,
    workers: int = 1,
) -> StepOutcome:
    """One block pseudo-marginal step.

    A block index ``k`` (0-based) is drawn uniformly, block ``k`` is
    redrawn, and all blocks are filtered at the proposed parameter.  The
    estimate is the average of the per-block likelihood estimates.
    """
    if not isinstance(state.stores, BlockedStore):
        raise ValueError("bpm_step needs a blocked store")
    s_theta, s_store, s_accept, s_block = child_seeds(seed, 4)
    cfg = _pf_config(cfg, proposal)
    theta_p, log_q_fwd, fwd_mom, fallback = _propose_theta(state, proposal, np.random.default_rng(s_theta))
    k = choose_block(state.stores.G, s_block)
    stores_p = block_update(state.stores, k, s_store)
    lp_p = model.log_prior(theta_p)
    if not np.isfinite(lp_p):
        return StepOutcome(state, False, 0.0, k, fallback)
    ll, sc, hs = evaluate_blocks(model, theta_p, y, stores_p, cfg, executor, workers)
    total = log_mean_exp(ll)
    if not np.isfinite(total):
        return StepOutcome(state, False, 0.0, k, fallback)
    score_p, hess_p = _combine_derivatives(ll, sc, hs)
    log_ratio = total + lp_p - state.log_lik - state.log_prior
    log_ratio += _log_q_ratio(state, theta_p, score_p, hess_p, proposal, log_q_fwd, fwd_mom)
    accepted, alpha = _accept(log_ratio, s_accept)
    if not accepted:
        return StepOutcome(state, False, alpha, k, fallback)
    new = ChainState(np.asarray(theta_p), total, float(lp_p), stores_p, ll, score_p, hess_p)
    return StepOutcome(new, True, alpha, k, fallback)
