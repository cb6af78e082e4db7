"""Command-line entry point.

Subcommands: ``simulate`` (run a scenario config and export results),
``design-fir`` (bandpass design to CSV), ``gen-paths`` (synthetic path
grids), ``metrics`` (recompute metrics from exported CSVs). Exit codes are
pinned: 0 success, 1 config or I/O error, 2 divergence (partial export
written). Summary output is one machine-parseable record per line.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

import numpy as np

from .dsp import PathMatrix
from .firdesign import BandSpec, design_bandpass, magnitude_response
from .harness import (
    compute_metrics,
    export_result,
    load_config,
    read_signal_csv,
    run_scenario,
)
from .signals import PathSynthSpec, path_seed, synth_path, write_path_csv

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with code 1, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="mcanc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", parents=[], help="run a scenario config and export CSVs")
    sim.add_argument("--config", required=True, help="scenario config JSON file")
    sim.add_argument("--out", required=True, help="output directory for the export file set")
    sim.add_argument("--duration", type=float, default=None, help="override duration_s")
    sim.add_argument("--seed", type=int, default=None, help="override noise_seed")
    sim.set_defaults(handler=_cmd_simulate)

    fir = sub.add_parser("design-fir", help="window-method bandpass design")
    fir.add_argument("--order", type=int, required=True, help="even filter order (taps = order+1)")
    fir.add_argument("--lo", type=float, required=True, help="lower band edge (1 = Nyquist)")
    fir.add_argument("--hi", type=float, required=True, help="upper band edge (1 = Nyquist)")
    fir.add_argument("--out", required=True, help="output CSV (shared path-grid format, 1x1)")
    fir.set_defaults(handler=_cmd_design_fir)

    gen = sub.add_parser("gen-paths", help="generate a synthetic path grid CSV")
    gen.add_argument("--m", type=int, required=True, help="number of mics (rows)")
    gen.add_argument("--k", type=int, required=True, help="number of sources (columns)")
    gen.add_argument("--len", type=int, required=True, dest="length", help="taps per path")
    gen.add_argument("--delay", type=int, required=True, help="leading zero taps")
    gen.add_argument("--decay", type=float, required=True, help="per-sample envelope in (0,1)")
    gen.add_argument("--seed", type=int, required=True, help="base seed (per-path seeds derived)")
    gen.add_argument("--out", required=True, help="output CSV")
    gen.set_defaults(handler=_cmd_gen_paths)

    met = sub.add_parser("metrics", help="recompute metrics from exported CSVs")
    met.add_argument("--error", required=True, help="error.csv from simulate")
    met.add_argument("--disturbance", required=True, help="disturbance.csv from simulate")
    met.add_argument("--block", type=int, required=True, help="block length in samples")
    met.set_defaults(handler=_cmd_metrics)
    return parser


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.duration is not None:
        cfg = dataclasses.replace(cfg, duration_s=args.duration)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, noise_seed=args.seed)
    cfg.validate()
    result = run_scenario(cfg)
    export_result(result, args.out)
    if result.metrics is not None:
        for m, nr in enumerate(result.metrics.noise_reduction_db):
            print(f"mic{m + 1} nr_db={float(nr)!r}")
    if result.diverged:
        print(f"diverged sample={result.divergence_sample}")
        return 2
    return 0


def _cmd_design_fir(args) -> int:
    spec = BandSpec(order=args.order, lo=args.lo, hi=args.hi)
    fir = design_bandpass(spec)
    write_path_csv(PathMatrix(fir.taps[np.newaxis, np.newaxis, :]), args.out)

    response = magnitude_response(fir, 4096)
    freqs = np.arange(4096) / 4095.0
    transition = 6.6 / spec.order
    passband = (freqs >= spec.lo + transition) & (freqs <= spec.hi - transition)
    stopband = (freqs <= spec.lo - transition) | (freqs >= spec.hi + transition)
    pass_dev = np.max(np.abs(20.0 * np.log10(response[passband]))) if passband.any() else np.nan
    stop_att = -20.0 * np.log10(np.max(response[stopband])) if stopband.any() else np.nan
    print(
        f"taps={len(fir)} center={0.5 * (spec.lo + spec.hi)!r} "
        f"passband_dev_db={float(pass_dev)!r} stopband_atten_db={float(stop_att)!r}"
    )
    return 0


def _cmd_gen_paths(args) -> int:
    if args.m < 1 or args.k < 1:
        raise ValueError(f"grid dimensions must be positive, got m={args.m}, k={args.k}")
    data = np.empty((args.m, args.k, args.length), dtype=np.float64)
    for m in range(args.m):
        for k in range(args.k):
            spec = PathSynthSpec(
                length=args.length,
                delay=args.delay,
                decay=args.decay,
                seed=path_seed(args.seed, m, k, args.k),
            )
            data[m, k] = synth_path(spec).taps
    write_path_csv(PathMatrix(data), args.out)
    print(f"paths={args.m}x{args.k} taps={args.length} out={args.out}")
    return 0


def _cmd_metrics(args) -> int:
    error = read_signal_csv(args.error)
    disturbance = read_signal_csv(args.disturbance)
    report = compute_metrics(error, disturbance, args.block)
    for line in report.csv_lines():
        print(line)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except FileNotFoundError as exc:
        print(f"mcanc: error: file not found: {exc.filename or exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"mcanc: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
