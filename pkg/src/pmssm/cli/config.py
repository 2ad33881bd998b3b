"""Experiment configuration: parsing, defaults and validation.

A configuration is a YAML (or JSON) mapping::

    model: {name: sv, order: 4}          # sv | growth | spline | lotka_volterra | lg_oracle
    data:
      simulate: {T: 1000, seed: 1, theta_true: {phi: 0.98, tau2: 0.1}}
      # or: csv: {path: prices.csv, column: Close, transform: log_returns}
    method:
      name: bpm                          # pm | cpm_state | cpm_disturbance | bpm
      N: auto                            # integer or "auto"
      rho: 0.9999                        # cpm only
      G: 12                              # bpm only
      sort: hilbert                      # auto | none | euclidean | hilbert
      resample_every: 1
    proposal: {kind: arw}                # arw | gradient
    iterations: 25000
    burnin: 5000
    seed: 0
    workers: null                        # BPM thread count (default min(G, cpus))
    theta_init: {phi: 0.95, tau2: 0.2}   # natural scale; defaults to theta_true
    output_dir: runs/sv_bpm
    benchmark_run: runs/sv_pm            # optional, for the relative TNV
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import yaml

from ..errors import ConfigError
from ..models import build_model

MODELS = ("sv", "growth", "spline", "lotka_volterra", "lg_oracle")
METHODS = ("pm", "cpm_state", "cpm_disturbance", "bpm")
MIN_KEPT_DRAWS = 2
WORKERS_ENV = "PMSSM_MAX_WORKERS"


@dataclass
class SimulateSpec:
    T: int
    seed: int
    theta_true: dict


@dataclass
class CsvSpec:
    path: str
    column: str
    transform: str = "log_returns"


@dataclass
class MethodSpec:
    name: str = "pm"
    N: Union[int, str] = "auto"
    rho: float = 0.0
    G: int = 12
    sort: str = "auto"
    resample_every: int = 1
    tune_reps: int = 50
    bpm_target: str = "share"
    N_init: int = 100
    N_max: int = 20000


@dataclass
class ProposalSpec:
    kind: str = "arw"
    scale: float = 1.0
    initial_cov_diag: Optional[list] = None


@dataclass
class ExperimentConfig:
    model: dict
    data: Union[SimulateSpec, CsvSpec]
    method: MethodSpec = field(default_factory=MethodSpec)
    proposal: ProposalSpec = field(default_factory=ProposalSpec)
    iterations: int = 25000
    burnin: int = 5000
    seed: int = 0
    workers: Optional[int] = None
    theta_init: Optional[dict] = None
    output_dir: str = "pmssm_run"
    benchmark_run: Optional[str] = None
    estimate_correlation: bool = True
    variance_reps: int = 50

    def to_dict(self) -> dict:
        d = asdict(self)
        d["data"] = {"simulate" if isinstance(self.data, SimulateSpec) else "csv": asdict(self.data)}
        return d

    @property
    def model_name(self) -> str:
        return self.model["name"]


def _require(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg)


def _as_int(v, name, minimum=None) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    v = int(v)
    if minimum is not None and v < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {v}")
    return v


def _as_float(v, name) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    return float(v)


def _known_keys(d: dict, allowed, where: str):
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(extra)}")


def parse_config(raw: Any) -> ExperimentConfig:
    """Validate a parsed mapping and build an :class:`ExperimentConfig`."""
    _require(isinstance(raw, dict), "configuration must be a mapping")
    _known_keys(raw, [f.name for f in ExperimentConfig.__dataclass_fields__.values()], "config")

    model = raw.get("model")
    if isinstance(model, str):
        model = {"name": model}
    _require(isinstance(model, dict) and "name" in model, "model must be a name or a mapping with 'name'")
    model = dict(model)
    _require(model["name"] in MODELS, f"model name must be one of {MODELS}")
    if model["name"] == "sv":
        model["order"] = _as_int(model.get("order", 1), "model.order", 1)

    data_raw = raw.get("data")
    _require(isinstance(data_raw, dict) and len(data_raw) == 1, "data must have exactly one of 'simulate' or 'csv'")
    if "simulate" in data_raw:
        s = data_raw["simulate"]
        _require(isinstance(s, dict), "data.simulate must be a mapping")
        _known_keys(s, ["T", "seed", "theta_true"], "data.simulate")
        _require(isinstance(s.get("theta_true"), dict), "data.simulate.theta_true must be a mapping")
        data = SimulateSpec(_as_int(s.get("T"), "data.simulate.T", 2), _as_int(s.get("seed", 0), "data.simulate.seed", 0), dict(s["theta_true"]))
    elif "csv" in data_raw:
        c = data_raw["csv"]
        _require(isinstance(c, dict) and "path" in c and "column" in c, "data.csv needs 'path' and 'column'")
        _known_keys(c, ["path", "column", "transform"], "data.csv")
        _require(c.get("transform", "log_returns") == "log_returns", "data.csv.transform must be 'log_returns'")
        _require(model["name"] == "sv", "csv return data is only supported for the sv model")
        data = CsvSpec(str(c["path"]), str(c["column"]))
    else:
        raise ConfigError("data must have exactly one of 'simulate' or 'csv'")

    m_raw = raw.get("method", {})
    if isinstance(m_raw, str):
        m_raw = {"name": m_raw}
    _require(isinstance(m_raw, dict), "method must be a name or a mapping")
    _known_keys(m_raw, MethodSpec.__dataclass_fields__.keys(), "method")
    method = MethodSpec(**m_raw)
    _require(method.name in METHODS, f"method name must be one of {METHODS}")
    if method.N != "auto":
        method.N = _as_int(method.N, "method.N", 1)
    method.rho = _as_float(method.rho, "method.rho")
    _require(0.0 <= method.rho <= 1.0, "method.rho must lie in [0, 1]")
    method.G = _as_int(method.G, "method.G", 1)
    method.resample_every = _as_int(method.resample_every, "method.resample_every", 1)
    method.tune_reps = _as_int(method.tune_reps, "method.tune_reps", 3)
    method.N_init = _as_int(method.N_init, "method.N_init", 1)
    method.N_max = _as_int(method.N_max, "method.N_max", 1)
    _require(method.sort in ("auto", "none", "euclidean", "hilbert"), "method.sort must be auto, none, euclidean or hilbert")
    if method.sort == "auto":
        method.sort = "hilbert" if method.name.startswith("cpm") else "none"
    _require(method.bpm_target in ("share", "literal"), "method.bpm_target must be 'share' or 'literal'")
    if method.name.startswith("cpm"):
        _require(model["name"] != "lotka_volterra", "correlated PM is not available for lotka_volterra (intractable transition)")
        if "rho" not in m_raw:
            method.rho = 0.9999
    elif method.name == "pm":
        _require(method.rho == 0.0, "method.rho applies to cpm only")

    p_raw = raw.get("proposal", {})
    if isinstance(p_raw, str):
        p_raw = {"kind": p_raw}
    _require(isinstance(p_raw, dict), "proposal must be a kind or a mapping")
    _known_keys(p_raw, ProposalSpec.__dataclass_fields__.keys(), "proposal")
    proposal = ProposalSpec(**p_raw)
    _require(proposal.kind in ("arw", "gradient"), "proposal.kind must be 'arw' or 'gradient'")
    _require(_as_float(proposal.scale, "proposal.scale") > 0, "proposal.scale must be positive")
    if proposal.kind == "gradient":
        _require(model["name"] != "lotka_volterra", "gradient proposal needs model derivatives (unavailable for lotka_volterra)")

    iterations = _as_int(raw.get("iterations", 25000), "iterations", 1)
    burnin = _as_int(raw.get("burnin", 5000), "burnin", 0)
    _require(
        iterations - burnin >= MIN_KEPT_DRAWS,
        f"iterations - burnin must be >= {MIN_KEPT_DRAWS} (got {iterations - burnin})",
    )
    workers = raw.get("workers")
    if workers is not None:
        workers = _as_int(workers, "workers", 1)
    theta_init = raw.get("theta_init")
    if theta_init is None:
        _require(isinstance(data, SimulateSpec), "theta_init is required for csv data")
    else:
        _require(isinstance(theta_init, dict), "theta_init must be a mapping")
    cfg = ExperimentConfig(
        model=model,
        data=data,
        method=method,
        proposal=proposal,
        iterations=iterations,
        burnin=burnin,
        seed=_as_int(raw.get("seed", 0), "seed", 0),
        workers=workers,
        theta_init=dict(theta_init) if theta_init else None,
        output_dir=str(raw.get("output_dir", "pmssm_run")),
        benchmark_run=None if raw.get("benchmark_run") is None else str(raw["benchmark_run"]),
        estimate_correlation=bool(raw.get("estimate_correlation", True)),
        variance_reps=_as_int(raw.get("variance_reps", 50), "variance_reps", 3),
    )
    # parameter names must match the model
    probe = instantiate_model(cfg, T=2)
    for label, mapping in (("theta_true", getattr(data, "theta_true", None)), ("theta_init", cfg.theta_init)):
        if mapping is None:
            continue
        _require(set(mapping) == set(probe.param_names), f"{label} must give exactly {list(probe.param_names)}")
        try:
            probe.unconstrain({k: float(v) for k, v in mapping.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{label}: {exc}") from None
    return cfg


def instantiate_model(cfg: ExperimentConfig, T: int):
    opts = {k: v for k, v in cfg.model.items() if k != "name"}
    if cfg.model_name == "spline":
        opts.setdefault("delta", 1.0 / T)
    try:
        return build_model(cfg.model_name, **opts)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from None


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        raw = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (ValueError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return parse_config(raw)


def resolve_workers(cfg: ExperimentConfig) -> int:
    """Thread count for BPM: config value, else ``min(G, cpus)``, capped by the environment."""
    G = cfg.method.G if cfg.method.name == "bpm" else 1
    n = cfg.workers if cfg.workers is not None else min(G, os.cpu_count() or 1)
    cap = os.environ.get(WORKERS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ConfigError(f"{WORKERS_ENV} must be an integer") from None
    return max(1, min(n, G))
