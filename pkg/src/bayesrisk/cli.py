"""
Command-line entry point.

    bayesrisk verify --config problem.json --samples 100000 --seed 0 --out report.json

The subcommand names the study; flags override the matching config fields.
Exit status: 0 when every verdict passes, 1 when any verdict fails, 2 for
config or usage errors, 3 for other runtime errors. Environment variables
are never consulted.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import FORMATS, STUDIES, RunConfig
from .exceptions import BayesRiskError, ConfigError
from .report import emit

EXIT_OK = 0
EXIT_FAILED_CHECK = 1
EXIT_CONFIG = 2
EXIT_ERROR = 3

log = logging.getLogger("bayesrisk")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run config (default: the scalar unit problem)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--samples", type=int, help="override the Monte Carlo sample count")
    common.add_argument("--out", help="report path (default: JSON to stdout)")
    common.add_argument("--format", choices=FORMATS, help="report format (default json)")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")

    parser = argparse.ArgumentParser(
        prog="bayesrisk",
        description="Cross-check closed-form risk identities of linear-Gaussian inverse problems.",
    )
    sub = parser.add_subparsers(dest="study", required=True, metavar="STUDY")
    for name in STUDIES:
        sub.add_parser(name, parents=[common], help=f"run the {name} study")
    return parser


def make_config(args: argparse.Namespace) -> RunConfig:
    if args.config:
        config = RunConfig.load(args.config)
    else:
        config = RunConfig(problem={"builder": "scalar_unit"})
    config.study = args.study
    if args.seed is not None:
        config.seed = args.seed
    if args.samples is not None:
        config.samples = args.samples
    if args.out is not None:
        config.output_path = args.out
    if args.format is not None:
        config.format = args.format
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    from .studies import run

    try:
        config = make_config(args)
        report = run(config)
    except ConfigError as exc:
        print(f"bayesrisk: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BayesRiskError, ValueError, ArithmeticError) as exc:
        print(f"bayesrisk: error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    for check in report.checks:
        print(f"{'PASS' if check.passed else 'FAIL'}  {check.name}", file=sys.stderr)
    print(f"determinism hash {report.determinism_hash()}", file=sys.stderr)

    try:
        if config.output_path:
            emit(report, config.output_path, config.format)
        else:
            sys.stdout.write(report.to_json() if config.format == "json" else report.to_csv())
    except OSError as exc:
        print(f"bayesrisk: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if report.passed else EXIT_FAILED_CHECK
