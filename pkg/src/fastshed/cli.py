"""Command-line driver: validate, sm, simulate, sweep, select-sr, codegen.

Exit codes: 0 success, 1 the result is infeasible or the relay tripped,
2 the input was rejected.
"""

from __future__ import annotations

import argparse
import math
import sys
import warnings
from pathlib import Path
from typing import Optional, Sequence

from .dynamics import nadir, run_scenario
from .errors import ConfigError, FastShedError, InfeasibleMarginError
from .grid_model import validate_config
from .io import (
    load_config,
    load_scenario,
    load_snapshot,
    matrix_to_csv,
    plant_from_dict,
    read_document,
    surface_to_csv,
    trace_to_csv,
)
from .lse import InfeasibleShedWarning, build_shedding_matrix
from .st import EmitOptions, emit_st
from .sweep import max_sr_for_margin, sweep_surface

EXIT_OK, EXIT_RESULT, EXIT_INPUT = 0, 1, 2

RANGE_HELP = "inclusive range a:b:step; b is included when step divides the span"


def parse_range(text: str) -> list[float]:
    """``a:b:step`` -> [a, a+step, ..., b]; a single number is a one-point range."""
    parts = text.split(":")
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad range {text!r}, expected a:b:step") from None
    if len(nums) == 1:
        return nums
    if len(nums) != 3:
        raise argparse.ArgumentTypeError(f"bad range {text!r}, expected a:b:step")
    a, b, step = nums
    if not step > 0 or b < a or not all(math.isfinite(v) for v in nums):
        raise argparse.ArgumentTypeError(f"bad range {text!r}: need step > 0 and b >= a")
    n = math.floor((b - a) / step + 1e-9)
    return [round(a + i * step, 12) for i in range(n + 1)]


def parse_pair(text: str) -> tuple[float, float]:
    try:
        lo, hi = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad interval {text!r}, expected lo:hi") from None
    return lo, hi


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(text)


def _summary(line: str, csv_to_stdout: bool) -> None:
    # keep stdout a clean CSV when the table goes there
    print(line, file=sys.stderr if csv_to_stdout else sys.stdout)


def cmd_validate(args) -> int:
    plant = plant_from_dict(read_document(args.config), args.config, validate=False)
    report = validate_config(plant.config)
    if not report.ok:
        for f in report:
            print(f"{args.config}: {f}")
        return EXIT_INPUT
    cfg = plant.config
    print(f"{args.config}: ok ({len(cfg.busbars)} busbars, {len(cfg.busties)} busties, "
          f"{len(cfg.generators)} generators, {len(cfg.loads)} loads)")
    return EXIT_OK


def cmd_sm(args) -> int:
    plant = load_config(args.config)
    snapshot = load_snapshot(args.snapshot, plant.config)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", InfeasibleShedWarning)
        matrix = build_shedding_matrix(plant.config, snapshot)
    _emit(matrix_to_csv(matrix), args.output)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return EXIT_RESULT if any(matrix.infeasible) else EXIT_OK


def _scenario(args):
    plant = load_config(args.config)
    scenario = load_scenario(args.scenario, plant)
    return plant, scenario


def cmd_simulate(args) -> int:
    plant, scenario = _scenario(args)
    trace = run_scenario(plant.config, scenario, plant.fls, governors=plant.governors,
                         shedding=not args.no_shedding)
    text = trace_to_csv(trace)
    if args.every > 1:
        lines = text.splitlines(keepends=True)
        text = lines[0] + "".join(lines[1::args.every])
    _emit(text, args.output)
    relay = "TRIPPED" if trace.relay_tripped else "not tripped"
    line = f"nadir: {nadir(trace):.4f} Hz, relay: {relay}"
    if trace.blackout:
        line += f", blackout at t = {trace.blackout_time:.3f} s"
    _summary(line, args.output is None)
    return EXIT_RESULT if trace.relay_tripped or trace.blackout else EXIT_OK


def cmd_sweep(args) -> int:
    plant, scenario = _scenario(args)
    surface = sweep_surface(plant.config, scenario, args.sr, args.delay, fls=plant.fls,
                            governors=plant.governors, workers=args.workers)
    _emit(surface_to_csv(surface), args.output)
    return EXIT_OK


def cmd_select_sr(args) -> int:
    plant, scenario = _scenario(args)
    threshold = plant.fls.uf_threshold if args.threshold is None else args.threshold
    try:
        sel = max_sr_for_margin(plant.config, scenario, threshold, args.margin, args.range, args.tolerance,
                                fls=plant.fls, governors=plant.governors)
    except InfeasibleMarginError as exc:
        print(f"infeasible: {exc}")
        return EXIT_RESULT
    print(f"sr: {sel.sr:.4f} MW, nadir: {sel.nadir:.4f} Hz, target: {sel.target:.4f} Hz, "
          f"simulations: {sel.simulations}")
    return EXIT_OK


def cmd_codegen(args) -> int:
    plant = load_config(args.config)
    program = emit_st(plant.config, EmitOptions(real_type=args.real_type))
    _emit(program.source, args.output)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fastshed", description="Fast load shedding toolkit.")
    sub = p.add_subparsers(dest="command", metavar="command", required=True)

    s = sub.add_parser("validate", help="check a plant file and list every finding")
    s.add_argument("config")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("sm", help="shedding matrix CSV for a snapshot")
    s.add_argument("config")
    s.add_argument("snapshot")
    s.add_argument("-o", "--output", help="write CSV here instead of stdout")
    s.set_defaults(func=cmd_sm)

    s = sub.add_parser("simulate", help="closed-loop run; trace CSV and nadir summary")
    s.add_argument("config")
    s.add_argument("scenario")
    s.add_argument("--no-shedding", action="store_true", help="disconnect ED-SA")
    s.add_argument("--every", type=int, default=1, metavar="N", help="keep every N-th sample (default 1)")
    s.add_argument("-o", "--output", help="write CSV here instead of stdout")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", help="nadir surface over SR parameter x total delay")
    s.add_argument("config")
    s.add_argument("scenario")
    s.add_argument("--sr", type=parse_range, required=True, help=f"SR values in MW, {RANGE_HELP}")
    s.add_argument("--delay", type=parse_range, required=True, help=f"total delays in s, {RANGE_HELP}")
    s.add_argument("--workers", type=int, default=1, help="parallel processes (default 1)")
    s.add_argument("-o", "--output", help="write CSV here instead of stdout")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("select-sr", help="largest SR keeping the nadir above threshold + margin")
    s.add_argument("config")
    s.add_argument("scenario")
    s.add_argument("--threshold", type=float, help="Hz, defaults to the plant's uf_threshold")
    s.add_argument("--margin", type=float, required=True, help="Hz above the threshold")
    s.add_argument("--range", type=parse_pair, default=(0.0, 12.0), help="SR search interval lo:hi in MW")
    s.add_argument("--tolerance", type=float, default=0.1, help="MW (default 0.1)")
    s.set_defaults(func=cmd_select_sr)

    s = sub.add_parser("codegen", help="emit IEC 61131-3 Structured Text")
    s.add_argument("config")
    s.add_argument("-o", "--output", help="write the .st file here instead of stdout")
    s.add_argument("--real-type", choices=("LREAL", "REAL"), default="LREAL")
    s.set_defaults(func=cmd_codegen)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (FastShedError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
