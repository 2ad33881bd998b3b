"""Experiment orchestration and artefact emission."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from ..diagnostics import acf, estimate_rho_l, summarize
from ..errors import ConfigError, DataError
from ..models import simulate
from ..pfilter import PFConfig
from ..samplers import ChainConfig, log_lik_replicates, run_chain, tune_num_particles
from ..samplers.tuning import block_correlation
from .config import CsvSpec, ExperimentConfig, instantiate_model, resolve_workers
from .data import load_returns

log = logging.getLogger("pmssm")

ACF_LAGS = 1000
# keys whose values depend on wall-clock time
TIMING_KEYS = ("time_per_iter_s", "tnv", "rtnv", "wall_time_s")
INITIAL_COV_VAR = 0.01


def fmt(value) -> str:
    """Text form used in every CSV artefact (17 significant digits for reals)."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.ndarray):
        return _json_safe(obj.tolist())
    return obj


def write_json(path: Path, doc: dict):
    path.write_text(json.dumps(_json_safe(doc), indent=2, sort_keys=True, allow_nan=False) + "\n")


def _write_csv(path: Path, header: Sequence[str], rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


@dataclass
class ExperimentData:
    y: np.ndarray
    theta_ref: np.ndarray
    skipped_rows: int = 0
    theta_true: Optional[np.ndarray] = None


def prepare_data(cfg: ExperimentConfig, model_factory=instantiate_model):
    if isinstance(cfg.data, CsvSpec):
        series = load_returns(cfg.data.path, cfg.data.column)
        model = model_factory(cfg, series.T)
        y = series.r[:, None]
        theta_ref = model.unconstrain(cfg.theta_init)
        return model, ExperimentData(y, theta_ref, series.skipped_rows)
    spec = cfg.data
    model = model_factory(cfg, spec.T)
    theta_true = model.unconstrain(spec.theta_true)
    _, y = simulate(model, theta_true, spec.T, spec.seed)
    theta_ref = model.unconstrain(cfg.theta_init) if cfg.theta_init else theta_true
    return model, ExperimentData(y, theta_ref, 0, theta_true)


def _aux_seed(cfg: ExperimentConfig, purpose: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(cfg.seed), purpose])


def _pf_config(cfg: ExperimentConfig, N: int) -> PFConfig:
    m = cfg.method
    space = "state" if m.name == "cpm_state" else "disturbance"
    return PFConfig(N=int(N), resample_every=m.resample_every, sort=m.sort, sort_space=space)


def _tuning_method(name: str) -> str:
    return "cpm" if name.startswith("cpm") else name


@dataclass
class ExperimentResult:
    output_dir: Path
    diagnostics: dict
    chain: object = field(repr=False, default=None)


def run_experiment(cfg: ExperimentConfig, output_dir: Optional[Union[str, Path]] = None) -> ExperimentResult:
    """Tune (if asked), run the chain and write ``chain.csv``, ``timing.csv``,
    ``diagnostics.json`` and ``acf_<param>.csv`` into the output directory."""
    out = Path(output_dir if output_dir is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    model, data = prepare_data(cfg)
    if not math.isfinite(model.log_prior(data.theta_ref)):
        raise ConfigError("starting parameter has zero prior density")
    m = cfg.method
    tmethod = _tuning_method(m.name)
    G = m.G if m.name == "bpm" else 1

    tuned = m.N == "auto"
    rho_l_hat = float("nan")
    tuning_converged = None
    if tuned:
        log.info("tuning N for %s", m.name)
        res = tune_num_particles(
            model, data.theta_ref, data.y, tmethod, G=m.G, rho=m.rho, reps=m.tune_reps,
            seed=_aux_seed(cfg, 1), cfg=_pf_config(cfg, m.N_init), N_init=m.N_init,
            N_max=m.N_max, bpm_target=m.bpm_target,
        )
        N, var_hat, tuning_converged = res.N, res.var_hat, res.converged
        if tmethod == "cpm":
            rho_l_hat = res.rho_l_hat
        log.info("tuned N=%d (Var log L = %.3f)", N, var_hat)
    else:
        N = int(m.N)
        ll = log_lik_replicates(model, data.theta_ref, data.y, _pf_config(cfg, N), cfg.variance_reps, _aux_seed(cfg, 1))
        var_hat = float(np.var(ll, ddof=1)) if np.isfinite(ll).all() else float("inf")
    pf_cfg = _pf_config(cfg, N)

    if cfg.estimate_correlation and m.name != "pm" and not (tuned and tmethod == "cpm"):
        relation = "block" if m.name == "bpm" else float(m.rho)
        try:
            rho_l_hat = estimate_rho_l(model, data.theta_ref, data.y, pf_cfg, relation, cfg.variance_reps, _aux_seed(cfg, 2), G=G)
        except ValueError:
            rho_l_hat = float("nan")

    d = model.theta_dim
    cov = np.diag(cfg.proposal.initial_cov_diag) if cfg.proposal.initial_cov_diag else INITIAL_COV_VAR * np.eye(d)
    if cov.shape != (d, d):
        raise ConfigError(f"proposal.initial_cov_diag must have {d} entries")
    chain_cfg = ChainConfig(
        method="cpm" if m.name.startswith("cpm") else m.name,
        iterations=cfg.iterations,
        burnin=cfg.burnin,
        rho=m.rho if m.name.startswith("cpm") else 0.0,
        G=m.G,
        proposal=cfg.proposal.kind,
        seed=cfg.seed,
        workers=resolve_workers(cfg),
        initial_cov=cov,
        step_scale=cfg.proposal.scale * 2.38 / math.sqrt(d),
        gradient_scale=cfg.proposal.scale,
    )

    def progress(i, outcome, seconds):
        if i % 1000 == 0:
            log.info("iteration %d/%d", i, cfg.iterations)

    run = run_chain(model, data.y, data.theta_ref, pf_cfg, chain_cfg, progress)

    names = list(model.param_names)
    natural = model.natural_draws(run.thetas)
    _write_csv(
        out / "chain.csv",
        ["iteration", *names, "log_lik", "accepted", "alpha", "block"],
        (
            [i + 1, *natural[i], run.log_lik[i], bool(run.accepted[i]), run.alpha[i], int(run.block[i])]
            for i in range(cfg.iterations)
        ),
    )
    _write_csv(out / "timing.csv", ["iteration", "step_time_s"], ([i + 1, run.step_time[i]] for i in range(cfg.iterations)))

    kept = natural[run.post_burnin]
    benchmark_tnv = None
    if cfg.benchmark_run:
        benchmark_tnv = _read_tnv(Path(cfg.benchmark_run))
    summary = summarize(
        kept, run.time_per_iter, benchmark_tnv, accept_rate=run.accept_rate,
        param_names=names, chain_unconstrained=run.thetas[run.post_burnin], allow_short=True,
    )
    if kept.shape[0] <= ACF_LAGS + 1:
        log.warning("only %d post-burn-in draws: IACT needs more than %d, reported as null", kept.shape[0], ACF_LAGS + 1)
    lags = min(ACF_LAGS, kept.shape[0] - 1)
    for j, name in enumerate(names):
        try:
            rows = list(enumerate(acf(kept[:, j], lags)))
        except ValueError:
            rows = []
        _write_csv(out / f"acf_{name}.csv", ["lag", "acf"], rows)

    doc = summary.to_dict()
    doc.pop("extra", None)
    for j, name in enumerate(names):
        doc[f"iact_{name}"] = summary.iact_per_param[j]
        doc[f"post_mean_{name}"] = summary.post_mean[j]
        doc[f"post_std_{name}"] = summary.post_std[j]
        doc[f"post_se_{name}"] = summary.post_se[j]
        doc[f"iact_unconstrained_{name}"] = summary.iact_unconstrained[j]
    doc.update(
        method=m.name,
        model=model.name,
        T=int(data.y.shape[0]),
        skipped_rows=data.skipped_rows,
        N=int(N),
        N_tuned=bool(tuned),
        tuning_converged=tuning_converged,
        var_log_lik=var_hat,
        rho=float(chain_cfg.rho),
        G=int(G),
        rho_l_hat=rho_l_hat,
        rho_l_target=block_correlation(m.G) if m.name == "bpm" else None,
        fallback_rate=float(np.mean(run.used_fallback[run.post_burnin])),
        iterations=cfg.iterations,
        burnin=cfg.burnin,
        benchmark_run=cfg.benchmark_run,
        config=replace(cfg, output_dir=str(out)).to_dict(),
        wall_time_s=time.perf_counter() - started,
    )
    write_json(out / "diagnostics.json", doc)
    return ExperimentResult(out, doc, run)


def _read_tnv(run_dir: Path) -> float:
    path = run_dir / "diagnostics.json"
    try:
        doc = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"benchmark run {run_dir}: cannot read diagnostics.json ({exc})") from None
    tnv = doc.get("tnv")
    if not isinstance(tnv, (int, float)) or not tnv > 0:
        raise ConfigError(f"benchmark run {run_dir}: diagnostics.json has no positive 'tnv'")
    return float(tnv)


# -- comparison table --------------------------------------------------------------

REQUIRED = ("N", "tnv", "time_per_iter_s", "iact_mean", "accept_rate", "param_names", "iact_per_param", "post_mean", "post_std", "post_se")


@dataclass
class ComparisonTable:
    """Rows are metrics, columns are runs; ``errors`` maps a run label to its problem."""

    labels: list[str]
    rows: list[tuple[str, list]]
    errors: dict[str, str]

    def render(self) -> str:
        width = max([10] + [len(lbl) for lbl in self.labels])
        name_w = max([8] + [len(name) for name, _ in self.rows])
        lines = [" " * name_w + "  " + "  ".join(lbl.rjust(width) for lbl in self.labels)]
        for name, values in self.rows:
            lines.append(name.ljust(name_w) + "  " + "  ".join(_cell(v).rjust(width) for v in values))
        for lbl, msg in self.errors.items():
            lines.append(f"error[{lbl}]: {msg}")
        return "\n".join(lines)

    def row(self, name: str) -> list:
        for n, values in self.rows:
            if n == name:
                return values
        raise KeyError(name)


def _cell(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(v)
    v = float(v)
    return "-" if not math.isfinite(v) else f"{v:.4f}"


def compare_runs(run_dirs: Sequence[Union[str, Path]], benchmark: int = 0) -> ComparisonTable:
    """Side-by-side summary of runs; RTNV is taken against ``run_dirs[benchmark]``."""
    run_dirs = [Path(p) for p in run_dirs]
    if not run_dirs:
        raise ConfigError("no runs to compare")
    if not 0 <= benchmark < len(run_dirs):
        raise ConfigError(f"benchmark index {benchmark} out of range")
    labels = [p.name or str(p) for p in run_dirs]
    # disambiguate repeated directory names
    labels = [f"{lbl}#{i}" if labels.count(lbl) > 1 else lbl for i, lbl in enumerate(labels)]
    docs: list[Optional[dict]] = []
    errors: dict[str, str] = {}
    for lbl, p in zip(labels, run_dirs):
        try:
            doc = json.loads((p / "diagnostics.json").read_text())
            missing = [k for k in REQUIRED if k not in doc]
            if missing:
                raise ValueError(f"missing field(s) {missing}")
            docs.append(doc)
        except (OSError, ValueError) as exc:
            errors[lbl] = str(exc)
            docs.append(None)
    bench = docs[benchmark]
    bench_tnv = bench["tnv"] if bench is not None else None
    if bench is None:
        errors.setdefault(labels[benchmark], "benchmark run unusable")

    params: list[str] = []
    for doc in docs:
        for name in (doc or {}).get("param_names", []):
            if name not in params:
                params.append(name)

    def per_param(doc, key, name):
        if doc is None or name not in doc["param_names"]:
            return None
        return doc[key][doc["param_names"].index(name)]

    def get(doc, key):
        return None if doc is None else doc.get(key)

    rows = [
        ("method", [get(doc, "method") for doc in docs]),
        ("N", [get(doc, "N") for doc in docs]),
        ("Var(logL)", [get(doc, "var_log_lik") for doc in docs]),
        ("rho", [get(doc, "rho") for doc in docs]),
        ("rho_l", [get(doc, "rho_l_hat") for doc in docs]),
    ]
    rows += [(f"IACT({p})", [per_param(doc, "iact_per_param", p) for doc in docs]) for p in params]
    for key, label in (("post_mean", "E"), ("post_std", "STD"), ("post_se", "SE")):
        rows += [(f"{label}({p})", [per_param(doc, key, p) for doc in docs]) for p in params]
    rtnv = [None if doc is None or not bench_tnv or doc["tnv"] is None else doc["tnv"] / bench_tnv for doc in docs]
    rows += [
        ("accept", [get(doc, "accept_rate") for doc in docs]),
        ("IACT_mean", [get(doc, "iact_mean") for doc in docs]),
        ("Time", [get(doc, "time_per_iter_s") for doc in docs]),
        ("TNV", [get(doc, "tnv") for doc in docs]),
        ("RTNV", rtnv),
    ]
    return ComparisonTable(labels, rows, errors)
