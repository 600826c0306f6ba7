"""Command-line surface: scenario synthesis, capture, decode/export and
trace analysis with optional figure output."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

from . import analysis, dut_synth
from .capture import CaptureConfig, CaptureError, run_capture
from .trace_codec import (
    TraceFormatError,
    export_csv,
    read_trace,
    write_trace,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

SEED_ENV_VAR = "RAILSCOPE_SEED"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="railscope", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a scenario document")
    p.add_argument("--preset", default="visual-servoing", choices=sorted(dut_synth.PRESETS))
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", required=True)

    p = sub.add_parser("capture", help="run the acquisition model on a scenario")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pretrigger", type=float, default=0.160, metavar="SECONDS")
    p.add_argument("--posttrigger", type=float, default=0.5, metavar="SECONDS")
    p.add_argument("--block-frames", type=int, default=64)
    p.add_argument("--pmbus-rate", type=float, default=125.0, metavar="SPS")

    p = sub.add_parser("decode", help="export a trace to CSV")
    p.add_argument("trace")
    p.add_argument("--csv", help="output path (default: stdout)")
    p.add_argument("--units", action="store_true", help="volts/amperes instead of raw codes")
    p.add_argument("--rails", help="comma-separated rail names (default: all)")

    p = sub.add_parser("export", help="alias for decode with an explicit output path")
    p.add_argument("--trace", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--units", action="store_true")
    p.add_argument("--rails")

    p = sub.add_parser("analyze", help="print a CSV result table to stdout")
    p.add_argument("mode", choices=["energy", "spectrum", "frames", "compare"])
    p.add_argument("--trace", required=True)
    p.add_argument("--rail", required=True)
    p.add_argument("--from", dest="t_from", type=float, metavar="SECONDS")
    p.add_argument("--to", dest="t_to", type=float, metavar="SECONDS")
    p.add_argument("--window", default="rect", choices=["rect", "hann"])
    p.add_argument("--channel", default="current", choices=["current", "voltage"])
    p.add_argument("--plot", metavar="FILE", help="also render a figure (e.g. .svg)")
    return parser


def _csv_out(rows: list[list], header: list[str]) -> None:
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def _cmd_synth(args) -> int:
    seed = int(os.environ.get(SEED_ENV_VAR, args.seed))
    scenario = dut_synth.PRESETS[args.preset](seed=seed)
    dut_synth.save_scenario(scenario, args.out)
    print(f"wrote scenario {args.out}", file=sys.stderr)
    return EXIT_OK


def _cmd_capture(args) -> int:
    scenario = dut_synth.load_scenario(args.scenario)
    env_seed = os.environ.get(SEED_ENV_VAR)
    if env_seed is not None:
        scenario = dut_synth.scenario_from_dict(
            {**dut_synth.scenario_to_dict(scenario), "seed": int(env_seed)}
        )
    config = CaptureConfig.from_scenario(
        scenario,
        pretrigger_s=args.pretrigger,
        posttrigger_s=args.posttrigger,
        block_frames=args.block_frames,
        pmbus_rate_sps=args.pmbus_rate,
    )
    trace = run_capture(scenario, config)
    write_trace(trace, args.out)
    print(
        f"wrote {trace.frame_count} frames, {len(trace.pmbus)} PMBus records "
        f"to {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


def _cmd_decode(args) -> int:
    trace = read_trace(args.trace)
    if trace.warnings:
        print(f"warning: {trace.warnings} truncated record(s) dropped", file=sys.stderr)
    rails = args.rails.split(",") if args.rails else None
    text = export_csv(trace, rails=rails, engineering_units=args.units)
    if getattr(args, "csv", None) or getattr(args, "out", None):
        path = getattr(args, "csv", None) or args.out
        with open(path, "w", newline="") as fh:
            fh.write(text)
        print(f"wrote {path}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_analyze(args) -> int:
    trace = read_trace(args.trace)
    rail = trace.header.rail_by_name(args.rail)
    ts = trace.frame_timestamps_ns()
    t_from = args.t_from if args.t_from is not None else float(ts[0]) * 1e-9
    t_to = args.t_to if args.t_to is not None else float(ts[-1]) * 1e-9

    if args.mode == "energy":
        joules = analysis.energy(trace, rail, t_from, t_to)
        _csv_out(
            [[rail.name, f"{t_from:.9f}", f"{t_to:.9f}", f"{joules:.9g}"]],
            ["rail", "t_from_s", "t_to_s", "energy_j"],
        )
        if args.plot:
            from . import plots

            plots.plot_power(analysis.power_series(trace, rail), rail, args.plot)
    elif args.mode == "spectrum":
        channel = rail.i_channel if args.channel == "current" else rail.v_channel
        spectrum = analysis.psd(trace, channel, window=args.window)
        _csv_out(
            [
                [f"{f:.6f}", f"{m:.9g}"]
                for f, m in zip(spectrum.frequencies_hz, spectrum.magnitudes)
            ],
            ["frequency_hz", "power"],
        )
        if args.plot:
            from . import plots

            plots.plot_spectrum(
                spectrum, f"{rail.name} {args.channel} spectrum", args.plot
            )
    elif args.mode == "frames":
        events = analysis.detect_frames(trace, rail)
        _csv_out(
            [
                [ev.t_start_ns, ev.t_end_ns, ev.t_end_ns - ev.t_start_ns,
                 f"{ev.peak_current_a:.9g}"]
                for ev in events
            ],
            ["t_start_ns", "t_end_ns", "duration_ns", "peak_current_a"],
        )
        if args.plot:
            from . import plots

            plots.plot_current(trace, rail, args.plot, events=events)
    else:  # compare
        result = analysis.compare_pmbus(trace, rail)
        _csv_out(
            [[rail.name, f"{result.mean_abs_error_a:.9g}",
              str(result.detectable).lower(), f"{result.recall:.4f}",
              result.highrate_events, result.pmbus_events]],
            ["rail", "mean_abs_error_a", "detectable", "recall",
             "highrate_events", "pmbus_events"],
        )
        if args.plot:
            from . import plots

            plots.plot_current(trace, rail, args.plot)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    handlers = {
        "synth": _cmd_synth,
        "capture": _cmd_capture,
        "decode": _cmd_decode,
        "export": _cmd_decode,
        "analyze": _cmd_analyze,
    }
    try:
        return handlers[args.command](args)
    except (CaptureError, TraceFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (KeyError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
