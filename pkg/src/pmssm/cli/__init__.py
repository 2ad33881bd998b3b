"""Config-driven experiment runner."""

from .config import ExperimentConfig, load_config, parse_config, resolve_workers
from .data import ReturnsSeries, load_returns
from .main import main
from .runner import ComparisonTable, compare_runs, run_experiment

__all__ = [
    "ComparisonTable",
    "ExperimentConfig",
    "ReturnsSeries",
    "compare_runs",
    "load_config",
    "load_returns",
    "main",
    "parse_config",
    "resolve_workers",
    "run_experiment",
]
