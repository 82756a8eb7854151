"""``formflow`` command line: analyze, characteristics, scenario, classify.

Exit status is 0 on success whatever the verdict, 2 for syntax, config and
precondition errors and 3 when an evaluation fails.
"""
import argparse
import io
import logging
import os
import sys
import time
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from . import dsl
from .characteristics import build_bundle, verify_closure
from .classification import classify, enumerate_cycle
from .config import FORMATS, RunConfig
from .errors import (ConfigError, DegreeError, DimensionMismatchError, DomainViolationError, ExpressionSyntaxError,
                     PreconditionError, UnboundVariableError, UnsupportedDegreeError)
from .forms import is_closed
from .grid import Grid
from .relations import analyze_relation
from .report import Report
from .scenarios import KINDS, load_scenario_config, preset, run_scenario

logger = logging.getLogger("formflow")

LOG_LEVEL_ENV = "FORMFLOW_LOG_LEVEL"
EXIT_OK, EXIT_USAGE, EXIT_EVALUATION = 0, 2, 3

_USAGE_ERRORS = (ExpressionSyntaxError, ConfigError, PreconditionError, DimensionMismatchError, DegreeError, OSError)
_EVALUATION_ERRORS = (DomainViolationError, UnboundVariableError, UnsupportedDegreeError)


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--grid", help="sample grid, name=lo:hi:count[,name=lo:hi:count...]")
    common.add_argument("--tol", type=float, help="absolute tolerance (default 1e-9)")
    common.add_argument("--out", help="output file ('-' or omitted: standard output)")
    common.add_argument("--format", choices=FORMATS, help="report format (default json)")
    common.add_argument("--workers", type=int, help="worker threads, overrides FORMFLOW_THREADS (0 = serial)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging on standard error")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="formflow", parents=[common],
                                     description="Closure and commutator analysis of skew-symmetric differential forms.")
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser("analyze", parents=[common], help="commutator of relation blocks, closure of forms")
    analyze.add_argument("input", help="DSL file with relation or form blocks")

    characteristics = commands.add_parser("characteristics", parents=[common],
                                          help="integrate a characteristic bundle and check its closure")
    characteristics.add_argument("input", help="DSL file with a pde or hj block and initial data")
    characteristics.add_argument("--trajectory", help="CSV file for the reference trajectory")

    scenario = commands.add_parser("scenario", parents=[common], help="thermo, gas or em scenario report")
    scenario.add_argument("--scenario", choices=KINDS, help="scenario kind")
    source = scenario.add_mutually_exclusive_group(required=True)
    source.add_argument("--preset", help="named preset of the scenario kind")
    source.add_argument("--config", help="JSON scenario config")

    table = commands.add_parser("classify", parents=[common], help="look up the (p, k, n) table")
    table.add_argument("--p", type=int, help="degree of the evolutionary form")
    table.add_argument("--k", type=int, help="degree of the generated closed form")
    table.add_argument("--n", type=int, help="dimension of the column")
    table.add_argument("--all", action="store_true", help="list every entry in cycle order")
    return parser


def _configure_logging(verbose: bool) -> logging.Handler:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    level = logging.DEBUG if verbose else os.environ.get(LOG_LEVEL_ENV, "WARNING").upper()
    logger.addHandler(handler)
    try:
        logger.setLevel(level)
    except ValueError:
        logger.setLevel(logging.WARNING)
        logger.warning("ignoring unknown %s=%r", LOG_LEVEL_ENV, level)
    return handler


def config_from_args(args: argparse.Namespace) -> RunConfig:
    config = (
        RunConfig()
        .for_command(args.command)
        .with_tol(getattr(args, "tol", 1e-9))
        .to(getattr(args, "out", None))
        .as_format(getattr(args, "format", "json"))
        .with_workers(getattr(args, "workers", None))
    )
    if hasattr(args, "grid"):
        config.on_grid(args.grid)
    if hasattr(args, "input"):
        config.from_file(args.input)
    return config


def _check_grid(grid: Grid, coords: Sequence[str], what: str) -> None:
    missing = [c for c in coords if c not in grid.names]
    if missing:
        raise ConfigError(f"grid does not cover the coordinates {missing} of {what}")


def cmd_analyze(config: RunConfig) -> Report:
    document = dsl.load(config.input_path)
    if not document.relations and not document.forms:
        raise ConfigError(f"{config.input_path}: no relation or form blocks")
    relations: List[Dict[str, Any]] = []
    for block in document.relations:
        grid = config.grid or block.grid()
        if grid is None:
            raise ConfigError(f"relation '{block.label}' declares no full domain; pass --grid")
        _check_grid(grid, block.omega.coords, f"relation '{block.label}'")
        relations.append(analyze_relation(block.relation(), grid, config.tol).to_dict())
    forms: List[Dict[str, Any]] = []
    for block in document.forms:
        if config.grid is not None:
            _check_grid(config.grid, block.form.coords, "the form")
        report = is_closed(block.form, grid=config.grid, tol=config.tol).to_dict()
        report["form"] = block.form.to_text()
        forms.append(report)
    if len(relations) + len(forms) == 1:
        payload = (relations or forms)[0]
    else:
        payload = {"relations": relations, "forms": forms}
    return Report.of("analyze", payload)


def cmd_characteristics(config: RunConfig, trajectory_path: Optional[str] = None) -> Report:
    run = dsl.load(config.input_path).characteristics()
    bundle = build_bundle(run.problem, run.data, run.seeds, run.step, run.steps, config.workers)
    reference = bundle.reference()
    csv_stream = io.StringIO()
    payload: Dict[str, Any] = {
        "parameter": bundle.system.parameter,
        "step": run.step,
        "steps": run.steps,
        "trajectories": len(bundle.trajectories),
        "final": reference.final(),
    }
    if run.steps == 0:
        logger.warning("steps = 0: trajectories hold only their initial points")
        csv_stream.write(",".join((reference.parameter,) + reference.names) + "\n")
        payload.update({"onResidual": None, "offResidual": None, "stripResidual": None, "causticPoints": []})
    else:
        reference.write_csv(csv_stream)
        payload.update(verify_closure(bundle, config.tol).to_dict())
    report = Report.of("characteristics", payload, csv_text=csv_stream.getvalue())
    if trajectory_path is None and config.out not in (None, "-") and config.format == "json":
        trajectory_path = str(Path(config.out).with_suffix(".csv"))
    if trajectory_path:
        with open(trajectory_path, "w", encoding="utf-8", newline="") as f:
            f.write(report.csv_text)
    return report


def cmd_scenario(config: RunConfig, kind: Optional[str], name: Optional[str], config_path: Optional[str]) -> Report:
    if config_path:
        kind_found, scenario = load_scenario_config(config_path)
        if kind and kind != kind_found:
            raise ConfigError(f"--scenario {kind} does not match the config's scenario '{kind_found}'")
        kind = kind_found
    else:
        if kind is None:
            raise ConfigError("--preset needs --scenario")
        scenario = preset(kind, name)
    outcome = run_scenario(kind, scenario, config.tol, config.grid)
    return Report.of("scenario", outcome.payload, csv_text=outcome.csv_text, meta={"kind": kind})


def cmd_classify(p: Optional[int], k: Optional[int], n: Optional[int], every: bool) -> Report:
    if every:
        return Report.of("classify", [entry.to_dict() for entry in enumerate_cycle()])
    if p is None or k is None:
        raise ConfigError("classify needs --p and --k, or --all")
    return Report.of("classify", classify(p, k, n).to_dict())


def run(args: argparse.Namespace) -> Report:
    config = config_from_args(args)
    started = time.perf_counter()
    if args.command == "analyze":
        report = cmd_analyze(config)
    elif args.command == "characteristics":
        report = cmd_characteristics(config, args.trajectory)
    elif args.command == "scenario":
        report = cmd_scenario(config, args.scenario, args.preset, args.config)
    else:
        report = cmd_classify(args.p, args.k, args.n, args.all)
    report.elapsed_time = time.perf_counter() - started
    logger.debug("%s finished in %.3f s", args.command, report.elapsed_time)
    config.emit(report)
    return report


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    handler = _configure_logging(getattr(args, "verbose", False))
    try:
        run(args)
    except _EVALUATION_ERRORS as exc:
        print(f"formflow: evaluation error: {exc}", file=sys.stderr)
        return EXIT_EVALUATION
    except _USAGE_ERRORS as exc:
        print(f"formflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        logger.removeHandler(handler)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
