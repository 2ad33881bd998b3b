"""Command-line entry point: ``pmssm run CONFIG`` and ``pmssm compare DIR...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, DataError, UnsupportedOperation
from .config import load_config
from .runner import compare_runs, run_experiment, write_json

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def exit_code_for(exc: BaseException) -> int:
    # DataError and ConfigError are ValueErrors too, so check them first
    if isinstance(exc, DataError):
        return EXIT_DATA
    if isinstance(exc, (ConfigError, UnsupportedOperation)):
        return EXIT_CONFIG
    if isinstance(exc, (FloatingPointError, np.linalg.LinAlgError, ArithmeticError)):
        return EXIT_NUMERICAL
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return EXIT_FAILURE


def error_document(exc: BaseException, code: int) -> dict:
    doc = {"status": "error", "exit_code": code, "error_type": type(exc).__name__, "message": str(exc)}
    if hasattr(exc, "t"):
        doc["t"] = exc.t
    return doc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmssm", description="Pseudo-marginal MCMC for state-space models")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a YAML/JSON config")
    run.add_argument("config", type=Path)
    run.add_argument("--output-dir", type=Path, default=None, help="override the config's output_dir")
    cmp_ = sub.add_parser("compare", help="tabulate finished runs")
    cmp_.add_argument("run_dirs", nargs="+", type=Path)
    cmp_.add_argument("--benchmark", type=int, default=0, help="index of the benchmark run (default 0)")
    return parser


def _run(args) -> int:
    out_dir: Optional[Path] = args.output_dir
    try:
        cfg = load_config(args.config)
        out_dir = Path(out_dir if out_dir is not None else cfg.output_dir)
        result = run_experiment(cfg, out_dir)
    except Exception as exc:  # every failure becomes an error document
        code = exit_code_for(exc)
        doc = error_document(exc, code)
        if out_dir is not None:
            try:
                out_dir.mkdir(parents=True, exist_ok=True)
                write_json(out_dir / "error.json", doc)
            except OSError:
                pass
        print(json.dumps(doc), file=sys.stderr)
        return code
    print(json.dumps({"status": "ok", "output_dir": str(result.output_dir)}))
    return EXIT_OK


def _compare(args) -> int:
    try:
        table = compare_runs(args.run_dirs, args.benchmark)
    except ConfigError as exc:
        print(json.dumps(error_document(exc, EXIT_CONFIG)), file=sys.stderr)
        return EXIT_CONFIG
    print(table.render())
    return EXIT_OK if not table.errors else EXIT_DATA


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(asctime)s %(message)s")
    return _run(args) if args.command == "run" else _compare(args)


if __name__ == "__main__":
    sys.exit(main())
