"""Command-line front end: run, sweep, plot and validate scenarios."""

import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import yaml
from pydantic import ValidationError

from app import __version__
from app.harness import CsvSchemaError
from app.plot_service import plot_service
from app.scenario_service import bundled_scenarios, scenario_service
from app.startup import startup

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING_FILE = 3
EXIT_INVALID_CONFIG = 4
EXIT_DIVERGED = 5
EXIT_CSV_SCHEMA = 6


def _overrides(args: argparse.Namespace) -> dict[str, int]:
    return {"decimation": args.decimate} if getattr(args, "decimate", None) else {}


def cmd_run(args: argparse.Namespace) -> int:
    cfg, path = scenario_service.load(args.config, _overrides(args))
    out = Path(args.out)
    outcome = scenario_service.run_to_directory(cfg, out, str(path))
    scenario_service.record_run(out, outcome.manifest)
    if outcome.diverged:
        logger.error("%s", outcome.message)
        return EXIT_DIVERGED
    summary = outcome.summary
    if summary is not None:
        print(f"peak current {summary.peak_current:.3f} pu at t={summary.peak_current_t:.4f} s")
        print(f"peak reference {summary.peak_reference_current:.3f} pu, limiter engaged: {summary.limiter_engaged}")
        if summary.iq_recovery_overshoot is not None:
            print(f"i_q recovery overshoot {summary.iq_recovery_overshoot:.3f} pu")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, parser: argparse.ArgumentParser) -> int:
    cfg, path = scenario_service.load(args.config, _overrides(args))
    param = args.param or (cfg.sweep.param if cfg.sweep else None)
    values = args.values or (cfg.sweep.values if cfg.sweep else None)
    if not param or not values:
        parser.error("sweep needs --param and --values, or a sweep block in the scenario")
    table = asyncio.run(
        scenario_service.run_sweep(cfg, param, list(values), Path(args.out), str(path), workers=args.workers)
    )
    print(table.to_string(index=False))
    return EXIT_DIVERGED if bool(table["diverged"].any()) else EXIT_OK


def cmd_plot(args: argparse.Namespace) -> int:
    for path in plot_service.render_csv(Path(args.csv_file), Path(args.out)):
        print(path)
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    cfg, _ = scenario_service.load(args.config)
    print(yaml.safe_dump(cfg.model_dump(mode="json"), sort_keys=False), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spc-sim",
        description="Grid-forming converter fault ride-through simulator",
        epilog=f"bundled scenarios: {', '.join(bundled_scenarios())}",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    verbs = parser.add_subparsers(dest="verb", required=True)

    run = verbs.add_parser("run", help="simulate one scenario")
    run.add_argument("--config", required=True, help="scenario file, manifest.json or bundled name")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--decimate", type=int, help="record every n-th control step")

    sweep = verbs.add_parser("sweep", help="simulate one scenario per parameter value")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--out", required=True)
    sweep.add_argument("--param", help="dotted path of a scalar field, e.g. faultmode.damping_x")
    sweep.add_argument("--values", type=float, nargs="+")
    sweep.add_argument("--workers", type=int, default=1)
    sweep.add_argument("--decimate", type=int)

    plot = verbs.add_parser("plot", help="render SVG panels from a timeseries.csv")
    plot.add_argument("csv_file")
    plot.add_argument("--out", required=True)

    validate = verbs.add_parser("validate", help="check a scenario and print it fully resolved")
    validate.add_argument("--config", required=True)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    startup(args.verbose)
    try:
        match args.verb:
            case "run":
                return cmd_run(args)
            case "sweep":
                return cmd_sweep(args, parser)
            case "plot":
                return cmd_plot(args)
            case _:
                return cmd_validate(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING_FILE
    except CsvSchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CSV_SCHEMA
    except (ValidationError, ValueError, yaml.YAMLError) as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
