"""Online attention prediction from a sliding window of gaze samples.

Each window is regressed per axis (unwrapped yaw and pitch) against time
normalized to [0, 1]; the regressors are evaluated over the horizon and the
horizon points are collapsed into one mean direction.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateMeanError, InvalidInputError
from .geometry import SpherePoint, angular_distance, spherical_mean
from .svr import SvrConfig, svr_predict_many, svr_train
from .trace import Trace, ground_truth_attention, resample

# distances this close to the tolerance count as inside it
_TOL_SLACK = 1e-9


@dataclass(frozen=True)
class PredictorConfig:
    window_s: float = 5.0
    horizon_s: float = 1.0
    rate_hz: float = 10.0
    tolerance_deg: float = 5.0
    # fit a least-squares line first and let the SVR model the residual;
    # a bare RBF expansion decays toward its bias outside the window
    detrend: bool = True

    def __post_init__(self):
        if not (self.window_s > 0 and self.horizon_s > 0 and self.rate_hz > 0):
            raise InvalidInputError("window, horizon and rate must be positive")
        if self.tolerance_deg < 0:
            raise InvalidInputError("tolerance must be non-negative")
        if self.window_s * self.rate_hz < 1:
            raise InvalidInputError("window must hold at least 2 samples at the given rate")

    @property
    def window_ms(self) -> float:
        return self.window_s * 1000.0

    @property
    def horizon_ms(self) -> float:
        return self.horizon_s * 1000.0


@dataclass(frozen=True)
class AttentionEstimate:
    mean: SpherePoint
    horizon_points: tuple[tuple[int, SpherePoint], ...]
    tolerance_deg: float
    issued_ms: int = 0
    # set when the horizon points cancel out and the last one stands in
    fallback: bool = False

    def __post_init__(self):
        ts = [t for t, _ in self.horizon_points]
        if not ts:
            raise InvalidInputError("estimate needs at least one horizon point")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InvalidInputError("horizon timestamps must increase")


@dataclass
class AccuracyReport:
    per_estimate: list[float]
    per_instant: list[list[bool]]
    correct: int
    total: int

    @property
    def accuracy(self) -> float:
        return self.correct / self.total if self.total else 0.0


def _prepare_window(window: Trace, cfg: PredictorConfig) -> Trace:
    if len(window) < 2:
        raise InvalidInputError("window needs at least 2 samples")
    if abs(window.span_ms - cfg.window_ms) > 0.1 * cfg.window_ms:
        raise InvalidInputError(
            f"window spans {window.span_ms} ms, expected {cfg.window_ms:.0f} ms within 10%")
    w = resample(window, cfg.rate_hz)
    if len(w) < 2:
        raise InvalidInputError("window too short after resampling")
    return w


def _window_series(w: Trace):
    t = np.asarray(w.times, dtype=float)
    tau = (t - t[0]) / (t[-1] - t[0])
    pts = [s.gaze_point for s in w.samples]
    yaw = np.unwrap(np.array([p.yaw_deg for p in pts]), period=360.0)
    pitch = np.array([p.pitch_deg for p in pts])
    return t, tau, yaw, pitch


def _horizon_times(w: Trace, cfg: PredictorConfig) -> list[int]:
    n = max(1, int(round(cfg.horizon_s * cfg.rate_hz)))
    step = 1000.0 / cfg.rate_hz
    return [w.end_ms + int(round(k * step)) for k in range(1, n + 1)]


def _estimate(w: Trace, cfg: PredictorConfig, fit: Callable) -> AttentionEstimate:
    t, tau, yaw, pitch = _window_series(w)
    hts = _horizon_times(w, cfg)
    htau = (np.asarray(hts, dtype=float) - t[0]) / (t[-1] - t[0])
    yaw_hat = fit(tau, yaw, htau)
    pitch_hat = np.clip(fit(tau, pitch, htau), -90.0, 90.0)
    points = tuple((ts, SpherePoint(float(y), float(p))) for ts, y, p in zip(hts, yaw_hat, pitch_hat))
    try:
        mean = spherical_mean(p for _, p in points)
        fallback = False
    except DegenerateMeanError:
        warnings.warn("horizon predictions cancel out; using the last horizon point")
        mean = points[-1][1]
        fallback = True
    return AttentionEstimate(mean, points, cfg.tolerance_deg, w.end_ms, fallback)


def _linear_fit(tau, y, htau):
    slope, icpt = np.polyfit(tau, y, 1)
    return slope * htau + icpt


def _svr_fit(svr_cfg: SvrConfig, detrend: bool):
    def fit(tau, y, htau):
        if detrend:
            slope, icpt = np.polyfit(tau, y, 1)
            resid = y - (slope * tau + icpt)
            m = svr_train(tau, resid, svr_cfg)
            return slope * htau + icpt + svr_predict_many(m, htau)
        m = svr_train(tau, y, svr_cfg)
        return svr_predict_many(m, htau)
    return fit


def predict_attention(window: Trace, cfg: PredictorConfig = PredictorConfig(),
                      svr_cfg: SvrConfig = SvrConfig()) -> AttentionEstimate:
    """SVR attention estimate for the horizon following ``window``."""
    w = _prepare_window(window, cfg)
    return _estimate(w, cfg, _svr_fit(svr_cfg, cfg.detrend))


def linear_predict_attention(window: Trace, cfg: PredictorConfig = PredictorConfig()) -> AttentionEstimate:
    """Ordinary-least-squares baseline with the same windowing."""
    w = _prepare_window(window, cfg)
    return _estimate(w, cfg, _linear_fit)


def eval_accuracy(estimates: Sequence[AttentionEstimate], truth: Trace,
                  tolerance_deg: Optional[float] = None) -> AccuracyReport:
    """Fraction of horizon instants whose true gaze lies within tolerance of the mean.

    The inequality is closed: a distance equal to the tolerance counts.
    """
    if not estimates:
        raise InvalidInputError("no estimates to evaluate")
    per_est, per_inst = [], []
    correct = total = 0
    for est in estimates:
        tol = est.tolerance_deg if tolerance_deg is None else tolerance_deg
        flags = []
        for t_ms, _ in est.horizon_points:
            if t_ms < truth.start_ms or t_ms > truth.end_ms:
                raise InvalidInputError(f"horizon instant {t_ms} ms outside the truth trace")
            d = angular_distance(est.mean, ground_truth_attention(truth, t_ms))
            flags.append(d <= tol + _TOL_SLACK)
        per_inst.append(flags)
        per_est.append(sum(flags) / len(flags))
        correct += sum(flags)
        total += len(flags)
    return AccuracyReport(per_est, per_inst, correct, total)


def sliding_estimates(trace: Trace, cfg: PredictorConfig = PredictorConfig(),
                      svr_cfg: SvrConfig = SvrConfig(), model: str = "svr",
                      stride_s: float = 1.0, max_estimates: Optional[int] = None) -> list[AttentionEstimate]:
    """One estimate per stride: window [e - window, e], horizon after e.

    The first window ends ``window_s`` after the trace start; windows stop
    once the horizon would run past the end of the trace.
    """
    if model not in ("svr", "linear"):
        raise InvalidInputError(f"unknown model {model!r}")
    if len(trace) < 2:
        raise InvalidInputError("trace too short")
    uniform = resample(trace, cfg.rate_hz)
    stride = int(round(stride_s * 1000))
    if stride <= 0:
        raise InvalidInputError("stride must be positive")
    out = []
    end = uniform.start_ms + int(round(cfg.window_ms))
    while end + cfg.horizon_ms <= uniform.end_ms:
        if max_estimates is not None and len(out) >= max_estimates:
            break
        win = uniform.segment(end - cfg.window_ms, end)
        if model == "svr":
            out.append(predict_attention(win, cfg, svr_cfg))
        else:
            out.append(linear_predict_attention(win, cfg))
        end += stride
    if not out:
        raise InvalidInputError("trace shorter than window plus horizon")
    return out
