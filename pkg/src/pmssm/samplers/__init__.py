"""Pseudo-marginal Metropolis-Hastings kernels, proposals and particle tuning."""

from .chain import ChainConfig, ChainRun, iteration_seed, run_chain
from .kernels import ChainState, StepOutcome, bpm_step, evaluate_blocks, initial_state, pm_step
from .proposals import (
    ProposalState,
    arw_propose,
    gradient_propose,
    initial_proposal,
    regularize_information,
    robbins_monro_update,
)
from .tuning import (
    TuningResult,
    block_correlation,
    log_lik_replicates,
    optimal_variance,
    tune_num_particles,
    variance_target,
)

__all__ = [
    "ChainConfig",
    "ChainRun",
    "iteration_seed",
    "run_chain",
    "ChainState",
    "StepOutcome",
    "bpm_step",
    "evaluate_blocks",
    "initial_state",
    "pm_step",
    "ProposalState",
    "arw_propose",
    "gradient_propose",
    "initial_proposal",
    "regularize_information",
    "robbins_monro_update",
    "TuningResult",
    "block_correlation",
    "log_lik_replicates",
    "optimal_variance",
    "tune_num_particles",
    "variance_target",
]
