"""Clip-by-clip prefetch streaming simulation with stall accounting.

Timeline model (all times in ms of wall clock, starting at 0):

* playback of clip ``k`` is due at ``startup_clips * D + k * D`` plus every
  stall incurred so far, where ``D`` is the clip duration;
* the first ``startup_clips`` clips are requested back to back from time
  0; after that clip ``k`` is requested one clip duration before its
  deadline, but never before clip ``k - 1`` has arrived (single link);
* a clip is ready after prediction, processing and network latency plus
  the transfer time of its bits over the bandwidth step function;
* a late clip pauses playback until it is ready (rebuffering), which
  pushes every later deadline back by the same amount.

Video time ``v`` maps to trace time ``trace.start + window + v``: the first
window of the trace is history for the first prediction.
"""
from __future__ import annotations

import bisect
import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

from .catalog import TileCatalog, all_hd_bits
from .errors import InvalidInputError, ValidationError
from .geometry import SpherePoint, angular_distance
from .prediction import PredictorConfig, predict_attention
from .qoe import QoeWeights, bvqa, clip_qoe
from .scheduler import (
    AreaMap,
    BandwidthBudget,
    ClipPlan,
    baseline_plan,
    classify_areas,
    schedule_clip,
)
from .svr import SvrConfig
from .trace import Trace, ground_truth_attention, head_direction, resample

SCHEMES = ("fovr", "full", "head_only", "gaze_only")
ROWS_HEADER = "clip,request_ms,ready_ms,display_ms,stall_ms,bits,scheduled_qoe,actual_qoe,correct"


@dataclass(frozen=True)
class BandwidthModel:
    """Piecewise-constant link rate: ``steps`` is a list of (t_ms, bps)."""

    steps: tuple[tuple[float, float], ...]

    def __post_init__(self):
        steps = tuple((float(t), float(r)) for t, r in self.steps)
        if not steps:
            raise ValidationError("bandwidth model needs at least one step")
        if steps[0][0] != 0:
            raise ValidationError("bandwidth trace must start at t=0")
        for (a, _), (b, _) in zip(steps, steps[1:]):
            if b <= a:
                raise ValidationError("bandwidth timestamps must strictly increase")
        if any(not (math.isfinite(r) and r > 0) for _, r in steps):
            raise ValidationError("bandwidth rates must be positive")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def constant(cls, bps: float) -> "BandwidthModel":
        return cls(((0.0, bps),))

    @classmethod
    def from_mbps(cls, mbps: float) -> "BandwidthModel":
        return cls.constant(mbps * 1e6)

    @property
    def is_constant(self) -> bool:
        return len(self.steps) == 1

    def rate_at(self, t_ms: float) -> float:
        times = [t for t, _ in self.steps]
        i = max(0, bisect.bisect_right(times, t_ms) - 1)
        return self.steps[i][1]

    def transfer_end(self, start_ms: float, bits: float) -> float:
        """Time at which ``bits`` sent from ``start_ms`` have fully arrived."""
        if bits <= 0:
            return start_ms
        times = [t for t, _ in self.steps]
        i = max(0, bisect.bisect_right(times, start_ms) - 1)
        t = start_ms
        remaining = bits
        while True:
            rate = self.steps[i][1]
            seg_end = self.steps[i + 1][0] if i + 1 < len(self.steps) else math.inf
            capacity = rate * (seg_end - t) / 1000.0
            if capacity >= remaining:
                return t + remaining / rate * 1000.0
            remaining -= capacity
            t = seg_end
            i += 1


def load_bandwidth_trace(source: Union[str, bytes]) -> BandwidthModel:
    """Parse ``t_ms,bps`` lines (``#`` comments allowed)."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
    steps = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ValidationError(f"bandwidth line {lineno}: expected t_ms,bps")
        try:
            steps.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise ValidationError(f"bandwidth line {lineno}: not numeric") from None
    return BandwidthModel(tuple(steps))


@dataclass(frozen=True)
class SimConfig:
    prediction: PredictorConfig = field(default_factory=PredictorConfig)
    svr: SvrConfig = field(default_factory=SvrConfig)
    processing_delay_ms: float = 90.0
    prediction_delay_ms: float = 0.066
    network_latency_ms: float = 20.0
    startup_clips: int = 1
    weights: QoeWeights = field(default_factory=QoeWeights)

    def __post_init__(self):
        if min(self.processing_delay_ms, self.prediction_delay_ms, self.network_latency_ms) < 0:
            raise InvalidInputError("delays must be non-negative")
        if int(self.startup_clips) != self.startup_clips or self.startup_clips < 1:
            raise InvalidInputError("startup_clips must be an integer >= 1")

    @property
    def overhead_ms(self) -> float:
        return self.prediction_delay_ms + self.processing_delay_ms + self.network_latency_ms


@dataclass(frozen=True)
class ClipRecord:
    clip_index: int
    request_t_ms: float
    ready_t_ms: float
    # playback clock: 0 when the first clip is due
    display_start_ms: float
    stall_ms: float
    plan: ClipPlan
    actual_areas: AreaMap
    qoe_actual: float
    prediction_correct: bool
    compression: float

    @property
    def bits(self) -> float:
        return self.plan.total_bits


@dataclass(frozen=True)
class SimReport:
    records: tuple[ClipRecord, ...]
    clip_duration_ms: int
    scheme: str = "fovr"

    @property
    def qoe_mean(self) -> float:
        return statistics.fmean(r.qoe_actual for r in self.records) if self.records else 0.0

    @property
    def qoe_std(self) -> float:
        return statistics.pstdev([r.qoe_actual for r in self.records]) if self.records else 0.0

    @property
    def total_stall_ms(self) -> float:
        return math.fsum(r.stall_ms for r in self.records)

    @property
    def stall_count(self) -> int:
        return sum(1 for r in self.records if r.stall_ms > 0)

    @property
    def total_bits(self) -> float:
        return math.fsum(r.bits for r in self.records)

    @property
    def mean_compression(self) -> float:
        return statistics.fmean(r.compression for r in self.records) if self.records else 0.0

    @property
    def prediction_accuracy(self) -> float:
        if not self.records:
            return 0.0
        return sum(r.prediction_correct for r in self.records) / len(self.records)

    def aggregates(self) -> dict:
        return {
            "clips": len(self.records),
            "mean_compression": self.mean_compression,
            "prediction_accuracy": self.prediction_accuracy,
            "qoe_mean": self.qoe_mean,
            "qoe_std": self.qoe_std,
            "scheme": self.scheme,
            "stall_count": self.stall_count,
            "total_bits": self.total_bits,
            "total_stall_ms": self.total_stall_ms,
        }

    def check_conservation(self, tol: float = 1e-6) -> None:
        """Playback start of clip k equals k * D plus the stalls up to and including k."""
        stall = 0.0
        for k, r in enumerate(self.records):
            stall += r.stall_ms
            expected = k * self.clip_duration_ms + stall
            if abs(r.display_start_ms - expected) > tol:
                raise AssertionError(f"clip {k}: display {r.display_start_ms} != {expected}")


def _check_durations(trace: Trace, cat: TileCatalog, cfg: SimConfig) -> None:
    need = cfg.prediction.window_ms + cat.clip_count * cat.clip_duration_ms
    if trace.span_ms < need:
        raise InvalidInputError(
            f"trace spans {trace.span_ms} ms but {need:.0f} ms are needed "
            f"({cfg.prediction.window_s} s window + {cat.clip_count} clips)")


def simulate(trace: Trace, cat: TileCatalog, bw: BandwidthModel, cfg: SimConfig = SimConfig(),
             scheme: str = "fovr") -> SimReport:
    if scheme not in SCHEMES:
        raise InvalidInputError(f"unknown scheme {scheme!r}")
    _check_durations(trace, cat, cfg)
    D = cat.clip_duration_ms
    pcfg = cfg.prediction
    uniform = resample(trace, pcfg.rate_hz)
    video0 = trace.start_ms + pcfg.window_ms

    records = []
    stall_total = 0.0
    prev_ready = 0.0
    base = cfg.startup_clips * D
    for k in range(cat.clip_count):
        clip_start_v = video0 + k * D
        deadline = base + k * D + stall_total
        if k < cfg.startup_clips:
            request = prev_ready
        else:
            request = max(deadline - D, prev_ready)

        truth = ground_truth_attention(trace, clip_start_v + D / 2.0)
        actual = classify_areas(truth, cat.grid)

        if scheme == "full":
            plan = baseline_plan("full", truth, truth, cat, k, cfg.weights)
            used = None
        elif scheme == "head_only":
            used = head_direction(trace, clip_start_v)
            plan = baseline_plan("head_only", used, used, cat, k, cfg.weights)
        else:
            window = uniform.segment(clip_start_v - pcfg.window_ms, clip_start_v)
            used = predict_attention(window, pcfg, cfg.svr).mean
            if scheme == "gaze_only":
                plan = baseline_plan("gaze_only", used, used, cat, k, cfg.weights)
            else:
                # budget covers only the transfer share of the clip interval
                usable_ms = max(D - cfg.overhead_ms, 1e-3)
                budget = BandwidthBudget.from_rate(bw.rate_at(request), usable_ms)
                plan = schedule_clip(classify_areas(used, cat.grid), cat, k, budget, cfg.weights)

        ready = bw.transfer_end(request + cfg.overhead_ms, plan.total_bits)
        stall = max(0.0, ready - deadline)
        stall_total += stall
        display = deadline + stall
        prev_ready = ready

        delivered = {t: bvqa(r.bitrate_kbps, actual.assignment[t]) for t, r in plan.choice.items()}
        q_actual = clip_qoe(delivered, actual.assignment, cfg.weights)
        correct = True if used is None else angular_distance(used, truth) <= pcfg.tolerance_deg + 1e-9
        records.append(ClipRecord(
            clip_index=k,
            request_t_ms=request,
            ready_t_ms=ready,
            display_start_ms=display - base,
            stall_ms=stall,
            plan=plan,
            actual_areas=actual,
            qoe_actual=q_actual,
            prediction_correct=correct,
            compression=1.0 - plan.total_bits / all_hd_bits(cat, k),
        ))
    report = SimReport(tuple(records), D, scheme)
    report.check_conservation()
    return report


def emit_report(r: SimReport, fmt: str = "rows") -> bytes:
    """``rows``: CSV with a fixed header; ``summary``: one JSON object."""
    if fmt == "rows":
        lines = [ROWS_HEADER]
        for c in r.records:
            lines.append(
                f"{c.clip_index},{c.request_t_ms:.3f},{c.ready_t_ms:.3f},{c.display_start_ms:.3f},"
                f"{c.stall_ms:.3f},{c.bits:.0f},{c.plan.scheduled_qoe:.6f},{c.qoe_actual:.6f},"
                f"{int(c.prediction_correct)}")
        return ("\n".join(lines) + "\n").encode("utf-8")
    if fmt == "summary":
        agg = {k: (round(v, 9) if isinstance(v, float) else v) for k, v in r.aggregates().items()}
        return (json.dumps(agg, sort_keys=True) + "\n").encode("utf-8")
    raise InvalidInputError(f"unknown report format {fmt!r}")
