"""Command-line entry point.

Subcommands: gen-diffuser, simulate, analyze, oracle, laser. Exit codes:
0 success, 2 usage/config error, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import sys

from .config import parse_config
from .errors import BispeckleError
from .fstack import read_fstack, write_pgm
from .pipeline import (
    analysis_mode,
    map_step,
    run_analyze,
    run_gen_diffuser,
    run_laser,
    run_oracle,
    run_simulate,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bispeckle",
        description="Quantum-correlation imaging laboratory: simulate, analyze, compare.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gd = sub.add_parser("gen-diffuser", help="synthesize a random phase screen")
    gd.add_argument("--n", type=int, required=True, help="grid size (power of two)")
    gd.add_argument("--pitch-um", type=float, required=True)
    gd.add_argument("--rms-rad", type=float, required=True)
    gd.add_argument("--corr-um", type=float, required=True)
    gd.add_argument("--seed", type=int, default=0)
    gd.add_argument("--out", required=True, help="output FSTACK path")

    sim = sub.add_parser("simulate", help="run the Monte Carlo twin-image pipeline")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out-dir", required=True)
    sim.add_argument("--seed", type=int, default=None, help="override [run] master_seed")

    an = sub.add_parser("analyze", help="cross-correlate a stack pair into a report")
    an.add_argument("--signal", required=True)
    an.add_argument("--idler", required=True)
    an.add_argument("--mode", choices=("far", "near"), required=True)
    an.add_argument("--report", required=True, help="output CSV path")
    an.add_argument("--out", default=None, help="output correlation-map FSTACK path")
    an.add_argument("--config", default=None, help="config for pixel calibration")
    an.add_argument("--step", type=float, default=1.0, help="units per pixel if no config")

    orc = sub.add_parser("oracle", help="evaluate the closed-form correlation map")
    orc.add_argument("--config", required=True)
    orc.add_argument("--out", required=True)

    las = sub.add_parser("laser", help="coherent far-field speckle of the screen")
    las.add_argument("--config", required=True)
    las.add_argument("--out", required=True)

    for p in (gd, sim, an, orc, las):
        p.add_argument(
            "--export-pgm",
            default=None,
            metavar="PATH",
            help="also export the first output frame as 16-bit PGM",
        )
    return parser


def _dispatch(args) -> str | None:
    """Run the selected command; returns the primary artifact for PGM export."""
    if args.command == "gen-diffuser":
        run_gen_diffuser(args.n, args.pitch_um, args.rms_rad, args.corr_um, args.seed, args.out)
        return args.out
    if args.command == "simulate":
        cfg = parse_config(args.config)
        if args.seed is not None:
            from dataclasses import replace

            cfg = replace(cfg, run=replace(cfg.run, master_seed=args.seed))
        run_simulate(cfg, args.out_dir, config_path=args.config)
        return str(args.out_dir) + "/signal.fstack"
    if args.command == "analyze":
        if args.config is not None:
            cfg = parse_config(args.config)
            step = map_step(cfg)
            if args.mode != analysis_mode(cfg):
                raise BispeckleError(
                    f"--mode {args.mode} contradicts config '{cfg.optics.config}'"
                )
        else:
            step = args.step
        run_analyze(
            args.signal, args.idler, args.mode, step,
            report_path=args.report, map_path=args.out,
        )
        return args.out
    if args.command == "oracle":
        run_oracle(parse_config(args.config), args.out)
        return args.out
    if args.command == "laser":
        run_laser(parse_config(args.config), args.out)
        return args.out
    raise AssertionError(f"unhandled command {args.command!r}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        artifact = _dispatch(args)
        if getattr(args, "export_pgm", None) and artifact:
            write_pgm(args.export_pgm, read_fstack(artifact)[0])
    except BispeckleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
