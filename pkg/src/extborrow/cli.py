"""Command-line entry point: ``extborrow run | summarize | plot``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .borrow_estimation import SolverConfig
from .errors import ConfigError, FitError
from .experiment import (
    Scenario,
    SummaryRow,
    emit_csv,
    emit_plot_data,
    read_csv,
    run_scenario,
    scenario_config,
    summarize,
)
from .trial_sim import ScenarioConfig

log = logging.getLogger("extborrow")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_FIT = 4

DEFAULT_FAILURE_TOLERANCE = 0.01


def load_config(path, scenario, overrides=None):
    """Build ``(ScenarioConfig, SolverConfig, failure_tolerance)`` from TOML.

    Top-level keys mirror :class:`ScenarioConfig`; an optional ``[solver]``
    table mirrors :class:`SolverConfig`; ``fit_failure_tolerance`` sets the
    exit-code-4 threshold.
    """
    raw = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    raw = dict(raw)
    solver_raw = raw.pop("solver", {})
    tolerance = raw.pop("fit_failure_tolerance", DEFAULT_FAILURE_TOLERANCE)
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})

    scenario_fields = {f.name for f in dataclasses.fields(ScenarioConfig)}
    solver_fields = {f.name for f in dataclasses.fields(SolverConfig)}
    unknown = (set(raw) - scenario_fields) | {f"solver.{k}" for k in set(solver_raw) - solver_fields}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return scenario_config(scenario, **raw), SolverConfig(**solver_raw), float(tolerance)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _cmd_run(args) -> int:
    overrides = {"base_seed": args.seed, "sims_per_hr": args.sims_per_hr}
    config, solver, tolerance = load_config(args.config, args.scenario, overrides)
    result = run_scenario(config, args.scenario, solver, jobs=args.jobs)
    out_dir = Path(args.out_dir)
    records_path = emit_csv(result.records, out_dir / "records.csv")
    emit_csv(summarize(result.records), out_dir / "summary.csv", SummaryRow)
    log.info("wrote %s", records_path)
    if result.failure_fraction > tolerance:
        log.error(
            "fit failures %d/%d exceed tolerance %.3g",
            result.fit_failures, len(result.records), tolerance,
        )
        return EXIT_FIT
    return EXIT_OK


def _cmd_summarize(args) -> int:
    records = read_csv(args.records)
    emit_csv(summarize(records, unfiltered=args.unfiltered), args.out, SummaryRow)
    return EXIT_OK


def _cmd_plot(args) -> int:
    records = read_csv(args.records)
    for path in emit_plot_data(records, args.out_dir, unfiltered=args.unfiltered, render=not args.no_svg):
        log.info("wrote %s", path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="extborrow", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate a scenario and write records.csv / summary.csv")
    run.add_argument("--scenario", choices=[s.value for s in Scenario], required=True)
    run.add_argument("--config", type=Path)
    run.add_argument("--out-dir", type=Path, required=True)
    run.add_argument("--seed", type=int, help="overrides base_seed")
    run.add_argument("--sims-per-hr", type=int, help="overrides sims_per_hr")
    run.add_argument("--jobs", type=int, default=1)
    run.set_defaults(func=_cmd_run)

    summ = sub.add_parser("summarize", help="bias / SD table from a records CSV")
    summ.add_argument("--records", type=Path, required=True)
    summ.add_argument("--out", type=Path, required=True)
    summ.add_argument("--unfiltered", action="store_true", help="keep unstable generalized estimates")
    summ.set_defaults(func=_cmd_summarize)

    plot = sub.add_parser("plot", help="scatter data (and SVGs) from a records CSV")
    plot.add_argument("--records", type=Path, required=True)
    plot.add_argument("--out-dir", type=Path, required=True)
    plot.add_argument("--unfiltered", action="store_true", help="one panel per method with every estimate")
    plot.add_argument("--no-svg", action="store_true")
    plot.set_defaults(func=_cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "jobs", 1) is not None and getattr(args, "jobs", 1) < 1:
        log.error("--jobs must be >= 1")
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("invalid config: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except FitError as exc:
        log.error("fit failure: %s", exc)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
