"""Head/gaze traces: file I/O, resampling, synthesis and ground truth.

Trace file format (UTF-8, one record per line)::

    t_ms qw qx qy qz gx gy gz [ox oy oz]

Fields are separated by single spaces. ``t_ms`` is an integer number of
milliseconds; the head orientation quaternion and the world-frame gaze
direction follow, written with 9 fractional digits. The optional gaze
origin must sit at the sphere center (the player camera), within 1e-6.
Lines starting with ``#`` are comments, except that a ``# rate_hz: <r>``
line records the nominal sampling rate.
"""
from __future__ import annotations

import bisect
import io
import math
import re
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional, Union

import numpy as np

from .errors import InvalidInputError, ParseError, RangeError, ValidationError
from .geometry import (
    Quaternion,
    SpherePoint,
    UnitVec3,
    dir_to_sphere,
    is_unit,
    normalize,
    quat_from_yaw_pitch,
    quat_to_forward,
    slerp_quat,
    slerp_vec,
    sphere_to_dir,
    tangent_basis,
)

HEADER = "# t_ms qw qx qy qz gx gy gz"
_LOAD_NORM_TOL = 1e-3
_ORIGIN_TOL = 1e-6
_DIGITS = 9
_RATE_RE = re.compile(r"^#\s*rate_hz:\s*(\S+)\s*$")


def _quantize(v: float) -> float:
    # values live on the 9-digit decimal grid so files round-trip exactly
    return float(f"{v:.{_DIGITS}f}") + 0.0


def _canonical_quat(q: Quaternion) -> Quaternion:
    q = Quaternion(*(_quantize(c) for c in q.as_tuple()))
    if abs(q.norm() - 1.0) > 1e-9:
        n = q.normalized()
        q = Quaternion(*(_quantize(c) for c in n.as_tuple()))
    return q


def _canonical_dir(d: Iterable[float]) -> UnitVec3:
    v = UnitVec3(*(_quantize(c) for c in d))
    if not is_unit(v):
        n = normalize(v)
        v = UnitVec3(*(_quantize(c) for c in n))
    return v


@dataclass(frozen=True)
class TraceSample:
    t_ms: int
    head: Quaternion
    gaze_dir: UnitVec3

    @classmethod
    def make(cls, t_ms: int, head: Quaternion, gaze_dir: Iterable[float]) -> "TraceSample":
        """Build a sample with canonical (9-digit, unit-norm) components."""
        if t_ms < 0:
            raise ValidationError(f"negative timestamp {t_ms}")
        return cls(int(t_ms), _canonical_quat(head), _canonical_dir(gaze_dir))

    @property
    def gaze_point(self) -> SpherePoint:
        return dir_to_sphere(self.gaze_dir)


@dataclass(frozen=True)
class Trace:
    samples: tuple[TraceSample, ...]
    nominal_rate_hz: float
    _times: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        if not self.nominal_rate_hz > 0:
            raise ValidationError("nominal rate must be positive")
        times = tuple(s.t_ms for s in self.samples)
        for a, b in zip(times, times[1:]):
            if b <= a:
                raise ValidationError(f"timestamps not strictly increasing: {a} then {b}")
        object.__setattr__(self, "_times", times)

    def __len__(self):
        return len(self.samples)

    @property
    def times(self) -> tuple[int, ...]:
        return self._times

    @property
    def start_ms(self) -> int:
        return self._times[0]

    @property
    def end_ms(self) -> int:
        return self._times[-1]

    @property
    def span_ms(self) -> int:
        return self._times[-1] - self._times[0] if self._times else 0

    def segment(self, start_ms: float, end_ms: float) -> "Trace":
        """Samples with ``start_ms <= t_ms <= end_ms``."""
        lo = bisect.bisect_left(self._times, start_ms)
        hi = bisect.bisect_right(self._times, end_ms)
        return Trace(self.samples[lo:hi], self.nominal_rate_hz)

    def _locate(self, t_ms: float) -> tuple[int, float]:
        if not self.samples or t_ms < self._times[0] or t_ms > self._times[-1]:
            raise RangeError(f"t={t_ms} ms outside trace span")
        i = bisect.bisect_right(self._times, t_ms) - 1
        if i >= len(self._times) - 1:
            return len(self._times) - 1, 0.0
        t0, t1 = self._times[i], self._times[i + 1]
        return i, (t_ms - t0) / (t1 - t0)

    def gaze_at(self, t_ms: float) -> UnitVec3:
        i, f = self._locate(t_ms)
        if f == 0.0:
            return self.samples[i].gaze_dir
        return slerp_vec(self.samples[i].gaze_dir, self.samples[i + 1].gaze_dir, f)

    def head_at(self, t_ms: float) -> Quaternion:
        i, f = self._locate(t_ms)
        if f == 0.0:
            return self.samples[i].head
        return slerp_quat(self.samples[i].head, self.samples[i + 1].head, f)


# ---------------------------------------------------------------- file I/O

def _fmt(v: float) -> str:
    return f"{v:.{_DIGITS}f}"


def serialize_trace(tr: Trace) -> bytes:
    lines = [HEADER, f"# rate_hz: {tr.nominal_rate_hz!r}"]
    for s in tr.samples:
        vals = s.head.as_tuple() + tuple(s.gaze_dir)
        lines.append(" ".join([str(s.t_ms)] + [_fmt(v) for v in vals]))
    return ("\n".join(lines) + "\n").encode("utf-8")


def save_trace(tr: Trace, dest: Union[str, IO[bytes]]) -> None:
    data = serialize_trace(tr)
    if isinstance(dest, str):
        with open(dest, "wb") as fh:
            fh.write(data)
    else:
        dest.write(data)


def load_trace(source: Union[bytes, str, IO[bytes]]) -> Trace:
    """Parse and validate a trace file (path, bytes, or binary stream)."""
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        with open(source, "rb") as fh:
            text = fh.read().decode("utf-8")
    else:
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")

    samples: list[TraceSample] = []
    rate: Optional[float] = None
    last_t = None
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if line.startswith("#"):
            m = _RATE_RE.match(line)
            if m:
                try:
                    rate = float(m.group(1))
                except ValueError:
                    raise ParseError(lineno, f"bad rate directive {m.group(1)!r}") from None
            continue
        parts = line.split(" ")
        if len(parts) not in (8, 11):
            raise ParseError(lineno, f"expected 8 or 11 fields, got {len(parts)}")
        try:
            t_ms = int(parts[0])
            vals = [float(p) for p in parts[1:]]
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        if not all(math.isfinite(v) for v in vals):
            raise ParseError(lineno, "non-finite value")
        if t_ms < 0:
            raise ValidationError(f"line {lineno}: negative timestamp")
        if last_t is not None and t_ms <= last_t:
            raise ValidationError(f"line {lineno}: timestamp {t_ms} not after {last_t}")
        last_t = t_ms
        q = Quaternion(*vals[0:4])
        g = vals[4:7]
        qn = q.norm()
        gn = math.sqrt(sum(c * c for c in g))
        if abs(qn - 1.0) > _LOAD_NORM_TOL:
            raise ValidationError(f"line {lineno}: quaternion norm {qn:.6g} off unit")
        if abs(gn - 1.0) > _LOAD_NORM_TOL:
            raise ValidationError(f"line {lineno}: gaze direction norm {gn:.6g} off unit")
        if len(vals) == 10:
            off = math.sqrt(sum(c * c for c in vals[7:10]))
            if off > _ORIGIN_TOL:
                raise ValidationError(f"line {lineno}: gaze origin {off:.3g} m away from sphere center")
        samples.append(TraceSample.make(t_ms, q, g))

    if rate is None:
        rate = _infer_rate(samples)
    return Trace(tuple(samples), rate)


def _infer_rate(samples: list[TraceSample]) -> float:
    if len(samples) < 2:
        return 10.0
    dts = np.diff([s.t_ms for s in samples])
    return 1000.0 / float(np.median(dts))


# ---------------------------------------------------------------- resampling

def _grid(start_ms: int, end_ms: int, rate_hz: float) -> list[int]:
    step = 1000.0 / rate_hz
    n = int(math.floor((end_ms - start_ms) / step + 1e-9))
    ts = [start_ms + int(round(k * step)) for k in range(n + 1)]
    if any(b <= a for a, b in zip(ts, ts[1:])):
        raise InvalidInputError(f"rate {rate_hz} Hz too fine for millisecond timestamps")
    return ts


def resample(tr: Trace, rate_hz: float) -> Trace:
    """Uniform resampling with slerp on head and gaze.

    The grid starts at the first sample and steps by ``1000 / rate_hz`` ms
    (rounded to the millisecond) while staying inside the original span.
    """
    if not rate_hz > 0:
        raise InvalidInputError("rate must be positive")
    if len(tr) < 2:
        raise InvalidInputError("resampling needs at least 2 samples")
    out = []
    for t in _grid(tr.start_ms, tr.end_ms, rate_hz):
        i, f = tr._locate(t)
        if f == 0.0:
            out.append(tr.samples[i])
        else:
            out.append(TraceSample.make(t, tr.head_at(t), tr.gaze_at(t)))
    return Trace(tuple(out), float(rate_hz))


def ground_truth_attention(tr: Trace, t_ms: float) -> SpherePoint:
    """Where the viewer is looking at ``t_ms`` (gaze only)."""
    return dir_to_sphere(tr.gaze_at(t_ms))


def head_direction(tr: Trace, t_ms: float) -> SpherePoint:
    return dir_to_sphere(quat_to_forward(tr.head_at(t_ms)))


# ---------------------------------------------------------------- synthesis

@dataclass(frozen=True)
class SynthParams:
    """Knobs for :func:`gen_synthetic`; unused fields are ignored per kind."""

    duration_s: float = 10.0
    rate_hz: float = 10.0
    center_yaw_deg: float = 0.0
    center_pitch_deg: float = 0.0
    sigma_deg: float = 0.5
    # pursuit
    amplitude_deg: float = 30.0
    period_s: float = 8.0
    pitch_amplitude_deg: float = 10.0
    pitch_period_s: float = 12.0
    phase_deg: float = 0.0
    # saccade
    dwell_mean_s: float = 2.0
    jump_yaw_deg: float = 45.0
    jump_pitch_deg: float = 20.0
    pitch_limit_deg: float = 75.0
    # head follows the noiseless attention path by this fraction
    head_gain: float = 0.8


SYNTH_KINDS = ("static", "pursuit", "saccade")


def _clean_path(kind: str, p: SynthParams, ts_s: np.ndarray, rng: np.random.Generator):
    n = len(ts_s)
    if kind == "static":
        return np.full(n, p.center_yaw_deg), np.full(n, p.center_pitch_deg)
    if kind == "pursuit":
        ph = math.radians(p.phase_deg)
        yaw = p.center_yaw_deg + p.amplitude_deg * np.sin(2 * np.pi * ts_s / p.period_s + ph)
        pitch = p.center_pitch_deg + p.pitch_amplitude_deg * np.sin(2 * np.pi * ts_s / p.pitch_period_s + ph)
        return yaw, pitch
    # saccade: piecewise-constant targets, exponential dwell, uniform jumps
    yaw = np.empty(n)
    pitch = np.empty(n)
    cy, cp = p.center_yaw_deg, p.center_pitch_deg
    next_jump = rng.exponential(p.dwell_mean_s)
    for k, t in enumerate(ts_s):
        while t >= next_jump:
            cy = cy + rng.uniform(-p.jump_yaw_deg, p.jump_yaw_deg)
            cp = float(np.clip(cp + rng.uniform(-p.jump_pitch_deg, p.jump_pitch_deg),
                               -p.pitch_limit_deg, p.pitch_limit_deg))
            next_jump += rng.exponential(p.dwell_mean_s)
        yaw[k] = cy
        pitch[k] = cp
    return yaw, pitch


def gen_synthetic(kind: str, params: Optional[SynthParams] = None, seed: int = 0) -> Trace:
    """Deterministic synthetic trace for one of the three motion regimes."""
    p = params or SynthParams()
    if kind not in SYNTH_KINDS:
        raise InvalidInputError(f"unknown trace kind {kind!r}")
    if not p.duration_s > 0 or not p.rate_hz > 0:
        raise InvalidInputError("duration and rate must be positive")
    if p.sigma_deg < 0:
        raise InvalidInputError("sigma must be non-negative")
    rng = np.random.default_rng(seed)
    ts = _grid(0, int(round(p.duration_s * 1000)), p.rate_hz)
    ts_s = np.asarray(ts, dtype=float) / 1000.0
    yaw, pitch = _clean_path(kind, p, ts_s, rng)
    pitch = np.clip(pitch, -90.0, 90.0)
    noise = rng.standard_normal((len(ts), 2)) * math.radians(p.sigma_deg)

    samples = []
    for k, t in enumerate(ts):
        d = sphere_to_dir(SpherePoint(float(yaw[k]), float(pitch[k])))
        if p.sigma_deg > 0:
            e1, e2 = tangent_basis(d)
            a, b = noise[k]
            d = normalize([d[i] + a * e1[i] + b * e2[i] for i in range(3)])
        hy = p.center_yaw_deg + p.head_gain * (yaw[k] - p.center_yaw_deg)
        hp = p.center_pitch_deg + p.head_gain * (pitch[k] - p.center_pitch_deg)
        head = quat_from_yaw_pitch(float(hy), float(hp))
        samples.append(TraceSample.make(t, head, d))
    return Trace(tuple(samples), float(p.rate_hz))
