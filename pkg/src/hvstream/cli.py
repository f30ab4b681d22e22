"""Command-line driver.

Exit codes: 0 success, 1 runtime or data error, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from typing import Optional, Sequence

from . import __version__
from .catalog import load_manifest, serialize_manifest, synth_catalog
from .errors import HvStreamError
from .geometry import TileGrid
from .prediction import PredictorConfig, eval_accuracy, sliding_estimates
from .simulator import SCHEMES, BandwidthModel, SimConfig, emit_report, load_bandwidth_trace, simulate
from .svr import SvrConfig
from .trace import SYNTH_KINDS, SynthParams, gen_synthetic, load_trace, serialize_trace

TRACE_HELP = """\
trace file: one sample per line, "t_ms qw qx qy qz gx gy gz" separated by
single spaces (optional trailing "ox oy oz" gaze origin, which must be the
sphere center). Reals carry 9 fractional digits; "#" lines are comments and
"# rate_hz: R" records the nominal rate."""

PREDICT_HELP = """\
output: one line per estimate, "clip_index t_ms yaw_deg pitch_deg correct",
where t_ms is the end of the window the estimate was made from and correct
is 1 when the mean lies within tolerance of the true gaze at every horizon
instant. A final "# accuracy=..." line gives the per-instant accuracy."""

SIM_HELP = """\
--bw takes either a constant rate in Mbps or the path of a bandwidth trace
with "t_ms,bps" lines (step function, first timestamp 0). Rows output has
the header clip,request_ms,ready_ms,display_ms,stall_ms,bits,scheduled_qoe,
actual_qoe,correct; summary output is one JSON object of aggregates."""

CATALOG_HELP = """\
manifest: JSON document with grid, clip_count, clip_duration_ms, ladder
(HD/SD/LD nominal kbps, highest first) and table[clip]["col,row"][class]
listing each rung's kbps. Keys are sorted and reals rounded to 3 digits."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def _positive(kind):
    def conv(text):
        try:
            v = kind(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive: {text!r}")
        return v
    return conv


def _non_negative(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text!r}")
    return v


def _ratios(text):
    try:
        vals = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad ratio list {text!r}") from None
    if not vals or any(not 0 < v < 1 for v in vals):
        raise argparse.ArgumentTypeError(f"ratios must lie in (0, 1): {text!r}")
    if any(b >= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError(f"ratios must strictly decrease: {text!r}")
    return vals


def _jitter(text):
    v = _non_negative(text)
    if v >= 0.5:
        raise argparse.ArgumentTypeError("jitter must be below 0.5")
    return v


def _add_common(p):
    # accepted after the subcommand too; SUPPRESS keeps the top-level value
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output path or - for stdout (default -)")


def _add_predictor(p):
    p.add_argument("--window", type=_positive(float), default=5.0, help="window length, s")
    p.add_argument("--horizon", type=_positive(float), default=1.0, help="prediction horizon, s")
    p.add_argument("--rate", type=_positive(float), default=10.0, help="resampling rate, Hz")
    p.add_argument("--tolerance", type=_non_negative, default=5.0, help="attention tolerance, degrees")
    p.add_argument("--no-detrend", action="store_true", help="fit the SVR on raw angles")
    p.add_argument("--svr-c", type=_positive(float), default=100.0)
    p.add_argument("--svr-epsilon", type=_non_negative, default=0.5, help="tube half-width, degrees")
    p.add_argument("--svr-gamma", type=_positive(float), default=10.0)
    p.add_argument("--svr-tol", type=_positive(float), default=1e-4)
    p.add_argument("--svr-max-iter", type=_positive(int), default=10000)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hvstream", description="Attention-driven tiled 360-degree streaming experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    parser.add_argument("--out", default="-", help="output path or - for stdout")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    tr = sub.add_parser("trace", help="trace utilities")
    tr_sub = tr.add_subparsers(dest="trace_command", required=True, parser_class=_Parser)
    gen = tr_sub.add_parser("gen", help="generate a synthetic trace", epilog=TRACE_HELP,
                            formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(gen)
    d = SynthParams()
    gen.add_argument("--kind", choices=SYNTH_KINDS, required=True)
    gen.add_argument("--duration", type=_positive(float), default=d.duration_s, help="seconds")
    gen.add_argument("--rate", type=_positive(float), default=d.rate_hz, help="Hz")
    gen.add_argument("--yaw", type=float, default=d.center_yaw_deg, help="center yaw, degrees")
    gen.add_argument("--pitch", type=float, default=d.center_pitch_deg, help="center pitch, degrees")
    gen.add_argument("--sigma", type=_non_negative, default=d.sigma_deg, help="gaze noise, degrees")
    gen.add_argument("--amplitude", type=float, default=d.amplitude_deg, help="pursuit yaw amplitude")
    gen.add_argument("--period", type=_positive(float), default=d.period_s, help="pursuit yaw period, s")
    gen.add_argument("--pitch-amplitude", type=float, default=d.pitch_amplitude_deg)
    gen.add_argument("--pitch-period", type=_positive(float), default=d.pitch_period_s)
    gen.add_argument("--dwell", type=_positive(float), default=d.dwell_mean_s, help="saccade mean dwell, s")
    gen.add_argument("--head-gain", type=float, default=d.head_gain)

    pr = sub.add_parser("predict", help="sliding attention prediction over a trace", epilog=PREDICT_HELP,
                        formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(pr)
    pr.add_argument("trace", help="trace file")
    pr.add_argument("--model", choices=("svr", "linear"), default="svr")
    pr.add_argument("--stride", type=_positive(float), default=1.0, help="seconds between estimates")
    _add_predictor(pr)

    cat = sub.add_parser("catalog", help="catalog utilities")
    cat_sub = cat.add_subparsers(dest="catalog_command", required=True, parser_class=_Parser)
    syn = cat_sub.add_parser("synth", help="write a synthetic tile catalog", epilog=CATALOG_HELP,
                             formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(syn)
    syn.add_argument("--cols", type=_positive(int), default=36)
    syn.add_argument("--rows", type=_positive(int), default=36)
    syn.add_argument("--clips", type=_positive(int), default=10)
    syn.add_argument("--duration-ms", type=_positive(int), default=1000)
    syn.add_argument("--base-kbps", type=_positive(float), default=40000.0, help="all-HD clip bitrate")
    syn.add_argument("--sd-ratios", type=_ratios, default=(0.66, 0.4))
    syn.add_argument("--ld-ratios", type=_ratios, default=(0.12, 0.05))
    syn.add_argument("--jitter", type=_jitter, default=0.0)

    sim = sub.add_parser("simulate", help="stream a catalog along a trace", epilog=SIM_HELP,
                         formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_common(sim)
    sim.add_argument("--trace", required=True)
    sim.add_argument("--manifest", required=True)
    bw = sim.add_mutually_exclusive_group(required=True)
    bw.add_argument("--bw", help="constant Mbps or bandwidth trace path")
    bw.add_argument("--sweep", help="comma-separated constant rates in Mbps (summary per rate)")
    sim.add_argument("--scheme", choices=SCHEMES, default="fovr")
    sim.add_argument("--format", choices=("rows", "summary"), default="summary")
    sim.add_argument("--processing-delay", type=_non_negative, default=90.0, help="ms")
    sim.add_argument("--prediction-delay", type=_non_negative, default=0.066, help="ms")
    sim.add_argument("--latency", type=_non_negative, default=20.0, help="ms")
    sim.add_argument("--startup-clips", type=_positive(int), default=1)
    _add_predictor(sim)
    return parser


def _predictor_cfgs(args):
    pcfg = PredictorConfig(args.window, args.horizon, args.rate, args.tolerance, not args.no_detrend)
    scfg = SvrConfig(args.svr_c, args.svr_epsilon, args.svr_gamma, args.svr_tol, args.svr_max_iter)
    return pcfg, scfg


def _write(args, data: bytes) -> None:
    if args.out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        with open(args.out, "wb") as fh:
            fh.write(data)


def cmd_trace_gen(args) -> bytes:
    params = SynthParams(
        duration_s=args.duration, rate_hz=args.rate, center_yaw_deg=args.yaw,
        center_pitch_deg=args.pitch, sigma_deg=args.sigma, amplitude_deg=args.amplitude,
        period_s=args.period, pitch_amplitude_deg=args.pitch_amplitude,
        pitch_period_s=args.pitch_period, dwell_mean_s=args.dwell, head_gain=args.head_gain,
    )
    return serialize_trace(gen_synthetic(args.kind, params, args.seed))


def cmd_predict(args) -> bytes:
    pcfg, scfg = _predictor_cfgs(args)
    trace = load_trace(args.trace)
    if trace.span_ms < pcfg.window_ms + pcfg.horizon_ms:
        raise HvStreamError(f"trace spans {trace.span_ms} ms, shorter than window plus horizon")
    ests = sliding_estimates(trace, pcfg, scfg, model=args.model, stride_s=args.stride)
    rep = eval_accuracy(ests, trace)
    lines = []
    for k, (est, flags) in enumerate(zip(ests, rep.per_instant)):
        lines.append(f"{k} {est.issued_ms} {est.mean.yaw_deg:.6f} {est.mean.pitch_deg:.6f} {int(all(flags))}")
    lines.append(f"# accuracy={rep.accuracy:.6f} correct={rep.correct} total={rep.total} model={args.model}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def cmd_catalog_synth(args) -> bytes:
    cat = synth_catalog(TileGrid(args.cols, args.rows), args.clips, args.base_kbps, args.sd_ratios,
                        args.ld_ratios, args.jitter, args.seed, args.duration_ms)
    return serialize_manifest(cat)


def _parse_bw(value: str) -> BandwidthModel:
    try:
        mbps = float(value)
    except ValueError:
        if not os.path.exists(value):
            raise HvStreamError(f"--bw {value!r} is neither a rate nor a file")
        return load_bandwidth_trace(value)
    if not mbps > 0:
        raise HvStreamError("bandwidth must be positive")
    return BandwidthModel.from_mbps(mbps)


def cmd_simulate(args) -> bytes:
    pcfg, scfg = _predictor_cfgs(args)
    cfg = SimConfig(pcfg, scfg, args.processing_delay, args.prediction_delay, args.latency, args.startup_clips)
    trace = load_trace(args.trace)
    cat = load_manifest(args.manifest)
    if args.sweep:
        out = []
        for part in args.sweep.split(","):
            mbps = float(part)
            rep = simulate(trace, cat, BandwidthModel.from_mbps(mbps), cfg, args.scheme)
            agg = json.loads(emit_report(rep, "summary"))
            agg["bandwidth_mbps"] = mbps
            out.append(agg)
        return (json.dumps(out, sort_keys=True) + "\n").encode("utf-8")
    rep = simulate(trace, cat, _parse_bw(args.bw), cfg, args.scheme)
    return emit_report(rep, args.format)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.sweep:
        try:
            [float(p) for p in args.sweep.split(",")]
        except ValueError:
            parser.error(f"bad --sweep list {args.sweep!r}")
    try:
        if args.command == "trace":
            data = cmd_trace_gen(args)
        elif args.command == "predict":
            data = cmd_predict(args)
        elif args.command == "catalog":
            data = cmd_catalog_synth(args)
        else:
            data = cmd_simulate(args)
        _write(args, data)
    except (HvStreamError, OSError) as exc:
        print(f"hvstream: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
