"""Command-line interface for the DFA backlog estimation lab."""

import argparse
import sys
from typing import Any, Dict, Optional, Sequence

from __init__ import __version__
from config import (
    build_spec,
    load_config,
    parse_float_list,
    parse_int_list,
    parse_r0_list,
)
from constants import SEARCH_N_GRID
from estimators import estimator_names, parse_estimator
from experiments import COMMANDS, say, write_output

# Per-command defaults applied before config files and flags
COMMAND_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "trajectory": {"n_list": (1000,), "runs": 1000},
    "search": {"n_list": tuple(SEARCH_N_GRID), "runs": 200, "estimators": ("ae2_opt",)},
}


def estimator_arg(text: str) -> str:
    """argparse type: validate an estimator spec, keep the text."""
    try:
        parse_estimator(text)
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e))
    return text


def add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file whose keys mirror the experiment fields")
    parser.add_argument("--seed", type=int, help="Master seed (unsigned 64-bit)")
    parser.add_argument("--out", help="Output file (default: stdout)")


def add_simulation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--runs", type=int, help="Simulated runs per grid point")
    parser.add_argument(
        "--estimator",
        action="append",
        type=estimator_arg,
        help=f"Estimator spec, repeatable ({', '.join(estimator_names())}; e.g. ae2(b=2))",
    )
    parser.add_argument("--n-list", type=parse_int_list, help="Comma-separated tag counts")
    parser.add_argument(
        "--r0", type=parse_r0_list, help="Comma-separated initial frame lengths, or N"
    )
    parser.add_argument("--b", type=float, help="Real-frame growth exponent for plain ae2")
    parser.add_argument("--workers", type=int, help="Worker processes for simulation batches")


def create_parser() -> argparse.ArgumentParser:
    """Create and configure the argument parser."""
    parser = argparse.ArgumentParser(
        prog="dfa-lab",
        description="Backlog estimation laboratory for Dynamic Frame Aloha",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    # Table1 command
    table1_parser = subparsers.add_parser(
        "table1",
        help="Asymptotic efficiency of Schoute's estimate versus K_u",
        description="Evaluate the three-phase efficiency formula for the tabulated K_u values",
    )
    add_common_flags(table1_parser)

    # Sweep command
    sweep_parser = subparsers.add_parser(
        "sweep",
        help="Efficiency versus the number of tags",
        description="Exact values for memoryless estimators up to N=30, simulation beyond",
    )
    add_common_flags(sweep_parser)
    add_simulation_flags(sweep_parser)

    # Trajectory command
    trajectory_parser = subparsers.add_parser(
        "trajectory",
        help="Mean per-frame estimate, traffic and real/virtual ratio",
        description="Average simulated trajectories and compare them with the traffic recursion",
    )
    add_common_flags(trajectory_parser)
    add_simulation_flags(trajectory_parser)

    # Ktrace command
    ktrace_parser = subparsers.add_parser(
        "ktrace",
        help="Schoute efficiency versus initial traffic K",
        description="Efficiency from the expected-value traffic recursion for each K",
    )
    add_common_flags(ktrace_parser)
    ktrace_parser.add_argument("--k-list", type=parse_float_list, help="Comma-separated traffics")

    # Search command
    search_parser = subparsers.add_parser(
        "search",
        help="Search approach-phase multiplier sequences",
        description="Coordinate ascent maximizing the minimum efficiency over the N grid",
    )
    add_common_flags(search_parser)
    add_simulation_flags(search_parser)
    search_parser.add_argument("--restarts", type=int, help="Random restarts after the baseline")
    search_parser.add_argument(
        "--max-evaluations", type=int, help="Stop after this many candidate sequences"
    )
    search_parser.add_argument(
        "--timing", action="store_true", default=None, help="Include wall time in the report"
    )

    # Report command
    report_parser = subparsers.add_parser(
        "report",
        help="Numerical checks: posterior traffic, pow2 asymptote, rounding and stability",
        description="Closed-form and numerical results that need no simulation",
    )
    add_common_flags(report_parser)

    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    mapping = {
        "seed": "seed",
        "out": "out",
        "runs": "runs",
        "estimator": "estimators",
        "n_list": "n_list",
        "r0": "r0",
        "b": "b",
        "workers": "workers",
        "k_list": "k_list",
        "restarts": "restarts",
        "max_evaluations": "max_evaluations",
        "timing": "timing",
    }
    overrides: Dict[str, Any] = {}
    for attr, name in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[name] = tuple(value) if isinstance(value, list) else value
    return overrides


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Main entry point for the CLI."""
    parser = create_parser()
    args = parser.parse_args(argv)

    if not args.command:
        parser.print_help()
        sys.exit(1)

    try:
        config = load_config(args.config) if args.config else None
        try:
            spec = build_spec(
                args.command,
                config=config,
                overrides=_overrides(args),
                defaults=COMMAND_DEFAULTS.get(args.command),
            )
        except ValueError as e:
            parser.error(str(e))

        output = COMMANDS[args.command](spec)
        write_output(output.text, spec.out)
        for note in output.notes:
            say(note)

        if output.non_terminating:
            say(f"[!] {output.non_terminating} run(s) did not terminate")
            sys.exit(1)

    except KeyboardInterrupt:
        print("\nOperation cancelled by user.", file=sys.stderr)
        sys.exit(130)
    except Exception as e:
        print(f"Error: {e}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    main()
