"""Command line entry point: ``ubinode validate|run|demo``.

Exit codes: 0 success, 1 invalid scenario, 2 runtime failure. Alarms are
report content and never change the exit code.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from .errors import ScenarioError, UbinodeError
from .report import FORMATS, export_report, normalize_format, run
from .scenario import load_bundled, load_scenario

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
SEED_ENV = "UBINODE_SEED"

_MODES = {
    "strict": "strict_literal", "strict_literal": "strict_literal",
    "violation": "violation_only", "violation_only": "violation_only",
}


def _seed_arg(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be an unsigned integer")
    return value


def _threshold_arg(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"threshold must be a non-negative integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("threshold must be a non-negative integer")
    return value


def _format_arg(text):
    try:
        return normalize_format(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ubinode", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings from the agents")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a scenario file and report what it declares")
    p.add_argument("scenario")

    for name, helptext in (("run", "simulate a scenario file"), ("demo", "run the bundled Smart Office scenario")):
        p = sub.add_parser(name, help=helptext)
        if name == "run":
            p.add_argument("scenario")
        p.add_argument("--seed", type=_seed_arg, help=f"overrides {SEED_ENV} and the file's seed")
        p.add_argument("--mode", choices=sorted(_MODES))
        p.add_argument("--threshold", type=_threshold_arg)
        p.add_argument("--format", type=_format_arg, default="summary", help=f"one of {', '.join(FORMATS)}")
        p.add_argument("--out", default="-", help="output path, '-' for stdout")
    return parser


def _resolve_seed(arg_seed):
    if arg_seed is not None:
        return arg_seed
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return None
    value = int(env)
    if value < 0:
        raise ValueError
    return value


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")

    try:
        if args.command == "demo":
            scenario = load_bundled("marc_smart_office")
        else:
            scenario = load_scenario(args.scenario)
    except ScenarioError as exc:
        print(f"invalid scenario [{exc.category}]: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.command == "validate":
        print(
            f"ok: {scenario.name}: {scenario.catalog.n} features, {len(scenario.topology.nodes)} nodes, "
            f"{len(scenario.trace)} trace events, {len(scenario.intruders)} intruders, {len(scenario.joiners)} joiners"
        )
        return EXIT_OK

    try:
        seed = _resolve_seed(args.seed)
    except ValueError:
        print(f"{SEED_ENV} must be an unsigned integer", file=sys.stderr)
        return EXIT_INVALID
    scenario = scenario.with_overrides(
        seed=seed, mode=_MODES[args.mode] if args.mode else None, threshold=args.threshold
    )
    try:
        report = run(scenario)
        export_report(report, args.format, args.out)
    except UbinodeError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
