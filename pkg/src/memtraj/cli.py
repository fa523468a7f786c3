"""Command-line entry point.

    simulate <run> --config cfg.json [--seed N] [--out DIR] [--no-figures]
    simulate --list-models
    simulate --version

Exit codes: 0 success, 2 configuration/validation error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .config import MODELS, RUNS, load_config
from .errors import ConfigError, NumericalFailure
from .experiments import COMMANDS

_MODEL_HELP = {
    "atom_cavity": "two-level plant exchanging excitations with one lossy mode"
                   " (physics: omega_q, delta, g, gamma, plant_state)",
    "linear_optomech": "oscillator plant, position-coupled to one lossy mode"
                       " (physics: omega_m, delta, g_prime, gamma, mass,"
                       " alpha_mech)",
    "quadratic_optomech": "oscillator plant coupled through squared position"
                          " (physics: omega_m, delta, g, gamma)",
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Cross-validated conditional trajectories of a plant"
                    " monitored through a lossy memory mode.")
    parser.add_argument("run", nargs="?", choices=RUNS,
                        help="experiment to execute")
    parser.add_argument("--config", metavar="PATH",
                        help="JSON configuration file")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", metavar="DIR", default=".",
                        help="output directory (default: current)")
    parser.add_argument("--no-figures", action="store_true",
                        help="skip PNG rendering; write CSV/JSON only")
    parser.add_argument("--list-models", action="store_true",
                        help="list available models and their parameters")
    parser.add_argument("--version", action="version",
                        version=f"memtraj {__version__}")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.list_models:
        for name in MODELS:
            print(f"{name}: {_MODEL_HELP[name]}")
        return 0

    if args.run is None:
        print("error: a run command is required (one of: " + ", ".join(RUNS) + ")",
              file=sys.stderr)
        return 2
    if args.config is None:
        print("error: --config PATH is required", file=sys.stderr)
        return 2

    try:
        config = load_config(args.config, run=args.run, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        report = COMMANDS[config.run](config, out_dir,
                                      render_figures=not args.no_figures)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3

    report_path = out_dir / f"{config.run}_{config.model}.report.json"
    report.write_json(report_path)
    print(json.dumps({"command": report.command, "status": report.status,
                      "outputs": report.outputs, "summary": report.summary},
                     sort_keys=True, default=str))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
