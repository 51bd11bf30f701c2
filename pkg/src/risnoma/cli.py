"""Batch command-line interface for Monte Carlo sweeps."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .experiments import (
    AXES,
    ConfigError,
    Scheme,
    parse_config,
    run_sweep,
    summarize,
    _parse_axis_value,
)
from .orchestrator import ORDERING_SCHEMES


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="risnoma",
        description=(
            "Monte Carlo sweeps for joint transmit-beamforming and RIS "
            "phase-shift optimization in downlink NOMA."
        ),
    )
    parser.add_argument("--config", metavar="PATH", help="YAML sweep configuration")
    parser.add_argument("--out", metavar="PATH", help="output CSV path")
    parser.add_argument("--workers", type=int, metavar="INT", help="parallel worker processes")
    parser.add_argument("--seed", type=int, metavar="INT", help="master seed override")
    parser.add_argument("--trials", type=int, metavar="INT", help="trials per cell override")
    parser.add_argument(
        "--axis",
        metavar="NAME=v1,v2,...",
        help=f"sweep axis and values; axis one of {', '.join(AXES)}",
    )
    parser.add_argument(
        "--scheme",
        action="append",
        metavar="dc|sdr|random|noris",
        help="optimizer variant (repeatable; combined with --ordering)",
    )
    parser.add_argument(
        "--ordering",
        choices=ORDERING_SCHEMES,
        help="user ordering scheme applied to every --scheme",
    )
    parser.add_argument("--bits", metavar="B|continuous", help="phase quantization bits")
    return parser


def _parse_axis_arg(text: str):
    name, sep, values = text.partition("=")
    if not sep:
        raise ConfigError("--axis expects NAME=v1,v2,...")
    if name not in AXES:
        raise ConfigError(f"--axis name must be one of {AXES}")
    vals = tuple(_parse_axis_value(v.strip()) for v in values.split(",") if v.strip())
    if not vals:
        raise ConfigError("--axis lists no values")
    return name, vals


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        spec = parse_config(text)

        if args.seed is not None:
            spec.base = replace(spec.base, seed=args.seed)
        if args.trials is not None:
            spec.n_trials = args.trials
        if args.workers is not None:
            spec.workers = args.workers
        if args.out is not None:
            spec.out = args.out
        if args.axis is not None:
            spec.axis, spec.values = _parse_axis_arg(args.axis)
        if args.bits is not None:
            spec.bits = _parse_axis_value(args.bits)
        if args.scheme:
            ordering = args.ordering or "eigen"
            spec.schemes = tuple(Scheme.parse(f"{s}:{ordering}") for s in args.scheme)
        elif args.ordering:
            spec.schemes = tuple(
                Scheme(s.optimizer, args.ordering) for s in spec.schemes
            )
        spec.validate()
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    rows = run_sweep(spec)
    print(summarize(rows))
    print(f"wrote {spec.out} and {spec.out[:-4] + '.timing.csv' if spec.out.endswith('.csv') else spec.out + '.timing.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
