"""Bitrate-based tile quality, area-weighted clip QoE, MOS and correlation."""
from __future__ import annotations

import enum
import math
import statistics
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import InvalidInputError
from .geometry import TileIndex


class AreaClass(str, enum.Enum):
    HD = "HD"
    SD = "SD"
    LD = "LD"


AREA_ORDER = (AreaClass.HD, AreaClass.SD, AreaClass.LD)

# saturation rate per kbps; the faster constant belongs to the less
# sensitive area
BVQA_RATE = {
    AreaClass.LD: 0.648e-3,
    AreaClass.SD: 0.324e-3,
    AreaClass.HD: 0.081e-3,
}


@dataclass(frozen=True)
class QoeWeights:
    hd: float = 0.5
    sd: float = 0.3
    ld: float = 0.2

    def __post_init__(self):
        if min(self.hd, self.sd, self.ld) < 0:
            raise InvalidInputError("QoE weights must be non-negative")
        if abs(self.hd + self.sd + self.ld - 1.0) > 1e-9:
            raise InvalidInputError("QoE weights must sum to 1")

    def of(self, area: AreaClass) -> float:
        return {AreaClass.HD: self.hd, AreaClass.SD: self.sd, AreaClass.LD: self.ld}[area]


def bvqa(bitrate_kbps: float, area: AreaClass) -> float:
    if not math.isfinite(bitrate_kbps) or bitrate_kbps < 0:
        raise InvalidInputError(f"bitrate must be finite and non-negative, got {bitrate_kbps}")
    return -math.expm1(-BVQA_RATE[AreaClass(area)] * bitrate_kbps)


def tile_weights(areas: Mapping[TileIndex, AreaClass], w: QoeWeights = QoeWeights()) -> dict[TileIndex, float]:
    """Per-tile weights: each class's share split evenly over its tiles.

    Classes without tiles drop out and the remaining shares are rescaled
    so the weights still sum to 1.
    """
    # str-valued enum: members and their labels hash alike, so only the
    # distinct labels need converting
    counts = {a: 0 for a in AREA_ORDER}
    for label, n in Counter(areas.values()).items():
        counts[AreaClass(label)] += n
    present = sum(w.of(a) for a in AREA_ORDER if counts[a])
    if present <= 0:
        # every populated class has zero weight; fall back to uniform
        n = len(areas)
        return {t: 1.0 / n for t in areas} if n else {}
    per = {a: (w.of(a) / present / counts[a] if counts[a] else 0.0) for a in AREA_ORDER}
    return {t: per[a] for t, a in areas.items()}


def clip_qoe(tile_bvqa: Mapping[TileIndex, float], areas: Mapping[TileIndex, AreaClass],
             w: QoeWeights = QoeWeights()) -> float:
    """Area-weighted QoE; equal to summing BVQA times :func:`tile_weights`.

    Evaluated per class as (renormalized class weight) x (mean class BVQA).
    """
    if not areas:
        raise InvalidInputError("empty tile set")
    try:
        # equal sizes plus every lookup succeeding means identical key sets
        if len(tile_bvqa) != len(areas):
            raise KeyError
        vals = [tile_bvqa[t] for t in areas]
    except KeyError:
        raise InvalidInputError("BVQA map and area map cover different tiles") from None
    groups = {a: [] for a in AREA_ORDER}
    try:
        for a, v in zip(areas.values(), vals):
            groups[a].append(v)
    except KeyError as exc:
        raise InvalidInputError(f"unknown area class {exc.args[0]!r}") from None
    present = sum(w.of(a) for a in AREA_ORDER if groups[a])
    if present <= 0:
        return math.fsum(tile_bvqa.values()) / len(areas)
    return math.fsum(w.of(a) / present * math.fsum(v) / len(v) for a, v in groups.items() if v)


def mos(scores: Sequence[float]) -> float:
    if len(scores) == 0:
        raise InvalidInputError("MOS of no scores")
    return statistics.fmean(scores)


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    if len(xs) != len(ys) or len(xs) < 2:
        raise InvalidInputError("need two equal-length sequences of at least 2 values")
    try:
        r = statistics.correlation(xs, ys)
    except statistics.StatisticsError as exc:
        raise InvalidInputError(str(exc)) from None
    return max(-1.0, min(1.0, r))
