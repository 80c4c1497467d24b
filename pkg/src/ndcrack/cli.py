"""Command-line runner for the sweeps in :mod:`ndcrack.experiments`."""
from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .experiments import AXIS_NAMES, KINDS, SweepSpec, format_results, emit_results, run_sweep
from .scenario import load_config

FULL_SCALE = dict(draws=300, trials=2000)

_AXIS_FLAG = {"m": "m", "n": "n", "p_dbm": "p"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ndcrack",
        description="Run reciprocity-attack sweeps and write tidy CSV/JSON results.")
    ap.add_argument("--experiment", required=True, choices=KINDS)
    ap.add_argument("--config", help="JSON file of scenario fields laid over the reference deployment")
    ap.add_argument("--m", type=int, nargs="+", help="BS antenna count(s)")
    ap.add_argument("--n", type=int, nargs="+", help="RIS element count(s)")
    ap.add_argument("--p", type=float, nargs="+", help="per-user transmit power(s) in dBm")
    ap.add_argument("--axis", type=float, nargs="+",
                    help="axis values for sweeps without a dedicated flag")
    ap.add_argument("--trials", type=int, help="Monte Carlo trials per point (default 500)")
    ap.add_argument("--draws", type=int, help="random surfaces per point (default 50)")
    ap.add_argument("--precoder", choices=("mrt", "zf"), default="mrt")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", help="output file (default: standard output)")
    ap.add_argument("--format", choices=("csv", "json"), default="csv")
    ap.add_argument("--paper-scale", action="store_true",
                    help="use 300 surfaces x 2000 trials unless overridden")
    return ap


def spec_from_args(args: argparse.Namespace) -> SweepSpec:
    kw = dict(kind=args.experiment, precoder=args.precoder, seed=args.seed)
    if args.paper_scale:
        kw.update(FULL_SCALE)
    if args.trials is not None:
        kw["trials"] = args.trials
    if args.draws is not None:
        kw["draws"] = args.draws
    if args.config:
        kw["config"] = load_config(args.config)
    lists = {"m": args.m, "n": args.n, "p_dbm": args.p}
    swept = AXIS_NAMES[args.experiment]
    for name, values in lists.items():
        if values is None:
            continue
        if name == swept:
            kw["axis"] = values
        elif len(values) != 1:
            raise SystemExit(f"--{_AXIS_FLAG[name]} takes a single value for {args.experiment}")
        else:
            kw[name] = values[0]
    if args.axis is not None:
        kw["axis"] = args.axis
    return SweepSpec(**kw)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(args)
        table = run_sweep(spec)
        if args.out:
            emit_results(table, args.format, args.out)
        else:
            sys.stdout.write(format_results(table, args.format))
    except (ValueError, OSError) as exc:
        print(f"ndcrack: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
