"""Running a full chain: adaptation during burn-in, then fixed kernels."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from ..pfilter.engine import PFConfig
from .kernels import ChainState, StepOutcome, bpm_step, initial_state, pm_step
from .proposals import ProposalState, freeze, initial_proposal, robbins_monro_update

METHODS = ("pm", "cpm", "bpm")


@dataclass(frozen=True)
class ChainConfig:
    """Settings of one chain.

    ``method="pm"`` is standard pseudo-marginal (``rho`` ignored, taken as 0),
    ``"cpm"`` correlates the random numbers with ``rho``, and ``"bpm"`` uses
    ``G`` blocks.  Adaptation of the random-walk proposal runs for the first
    ``burnin`` iterations.
    """

    method: str = "pm"
    iterations: int = 25000
    burnin: int = 5000
    rho: float = 0.0
    G: int = 12
    proposal: str = "arw"
    seed: int = 0
    workers: int = 1
    initial_cov: Optional[np.ndarray] = None
    step_scale: Optional[float] = None
    gradient_scale: float = 1.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if int(self.iterations) < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= int(self.burnin) < int(self.iterations):
            raise ValueError("burnin must lie in [0, iterations)")
        if not 0.0 <= float(self.rho) <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.method == "bpm" and int(self.G) < 1:
            raise ValueError("G must be >= 1")
        if self.proposal not in ("arw", "gradient"):
            raise ValueError("proposal must be 'arw' or 'gradient'")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")


@dataclass
class ChainRun:
    """Per-iteration records of a chain (iterations ``1..n``)."""

    thetas: np.ndarray
    log_lik: np.ndarray
    accepted: np.ndarray
    alpha: np.ndarray
    block: np.ndarray
    used_fallback: np.ndarray
    step_time: np.ndarray
    burnin: int
    final_state: ChainState
    final_proposal: ProposalState

    @property
    def post_burnin(self) -> slice:
        return slice(self.burnin, None)

    @property
    def accept_rate(self) -> float:
        return float(np.mean(self.accepted[self.post_burnin]))

    @property
    def time_per_iter(self) -> float:
        return float(np.mean(self.step_time[self.post_burnin]))


def iteration_seed(seed: int, i: int) -> np.random.SeedSequence:
    """Seed of iteration ``i`` (0 is the initial draw of random numbers)."""
    return np.random.SeedSequence(int(seed), spawn_key=(int(i),))


def run_chain(
    model,
    y,
    theta0,
    pf_cfg: PFConfig,
    chain_cfg: ChainConfig,
    callback: Optional[Callable[[int, StepOutcome, float], None]] = None,
) -> ChainRun:
    """Run ``chain_cfg.iterations`` steps from ``theta0`` (unconstrained scale).

    ``callback(i, outcome, seconds)`` is invoked after every iteration.
    BPM filter evaluations are spread over ``chain_cfg.workers`` threads;
    the chain itself does not depend on the worker count.
    """
    cc = chain_cfg
    d = model.theta_dim
    theta0 = np.asarray(theta0, dtype=np.float64)
    proposal = initial_proposal(d, cc.proposal, cc.initial_cov, cc.step_scale, cc.gradient_scale)
    G = int(cc.G) if cc.method == "bpm" else None
    rho = 0.0 if cc.method == "pm" else float(cc.rho)
    workers = int(cc.workers) if G is not None else 1
    executor = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    n = int(cc.iterations)
    thetas = np.empty((n, d))
    log_lik = np.empty(n)
    accepted = np.zeros(n, dtype=bool)
    alpha = np.empty(n)
    block = np.zeros(n, dtype=np.int64)
    fallback = np.zeros(n, dtype=bool)
    step_time = np.empty(n)
    try:
        state = initial_state(model, theta0, y, pf_cfg, iteration_seed(cc.seed, 0), G, proposal, executor, workers)
        for i in range(1, n + 1):
            t0 = time.perf_counter()
            seed_i = iteration_seed(cc.seed, i)
            if G is None:
                out = pm_step(state, model, y, pf_cfg, proposal, rho, seed_i)
            else:
                out = bpm_step(state, model, y, pf_cfg, proposal, seed_i, executor, workers)
            state = out.state
            if i <= cc.burnin:
                proposal = robbins_monro_update(proposal, out.alpha, state.theta)
                if i == cc.burnin:
                    proposal = freeze(proposal)
            dt = time.perf_counter() - t0
            k = i - 1
            thetas[k] = state.theta
            log_lik[k] = state.log_lik
            accepted[k] = out.accepted
            alpha[k] = out.alpha
            block[k] = out.block
            fallback[k] = out.used_fallback
            step_time[k] = dt
            if callback is not None:
                callback(i, out, dt)
    finally:
        if executor is not None:
            executor.shutdown()
    if cc.burnin == 0:
        proposal = freeze(proposal)
    return ChainRun(thetas, log_lik, accepted, alpha, block, fallback, step_time, int(cc.burnin), state, proposal)
