"""Area classification and per-clip definition selection.

Rung choice is made per area class: every LD tile shares one LD rung and
every SD tile one SD rung, while the single HD tile always gets the HD
rung.  The greedy descent lowers LD first, then SD, until the clip fits.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .catalog import Rung, TileCatalog, all_hd_bits, layer_bits, selection_bits
from .errors import CapacityError, InvalidInputError
from .geometry import SpherePoint, TileGrid, TileIndex, point_to_tile
from .qoe import AREA_ORDER, AreaClass, QoeWeights, bvqa, clip_qoe

EXHAUSTIVE_LIMIT = 10 ** 6
SCHEMES = ("full", "head_only", "gaze_only")


@dataclass(frozen=True)
class AreaMap:
    assignment: Mapping[TileIndex, AreaClass]
    attention_tile: TileIndex
    grid: TileGrid = field(default_factory=TileGrid)

    def tiles_of(self, area: AreaClass) -> list[TileIndex]:
        return [t for t, a in self.assignment.items() if a == area]

    def counts(self) -> dict[AreaClass, int]:
        out = {a: 0 for a in AREA_ORDER}
        for a in self.assignment.values():
            out[a] += 1
        return out

    def mask(self, area: AreaClass) -> np.ndarray:
        m = np.zeros((self.grid.rows, self.grid.cols), dtype=bool)
        for t in self.tiles_of(area):
            m[t.row, t.col] = True
        return m


@dataclass(frozen=True)
class BandwidthBudget:
    w_bits: float

    def __post_init__(self):
        if not self.w_bits > 0:
            raise InvalidInputError("bandwidth budget must be positive")

    @classmethod
    def from_rate(cls, bps: float, duration_ms: float) -> "BandwidthBudget":
        return cls(bps * duration_ms / 1000.0)


@dataclass(frozen=True)
class ClipPlan:
    clip_index: int
    choice: Mapping[TileIndex, Rung]
    total_bits: float
    scheduled_qoe: float
    feasible: bool
    # class-level rung indices; empty for baseline compositions
    levels: Mapping[AreaClass, int] = field(default_factory=dict)
    areas: Optional[AreaMap] = None

    def composition(self) -> dict[TileIndex, AreaClass]:
        return {t: r.area for t, r in self.choice.items()}


def sd_neighbors(center: TileIndex, grid: TileGrid) -> list[TileIndex]:
    """3x3 block around ``center``: columns wrap (yaw), rows clamp (pitch)."""
    out = []
    for dr in (-1, 0, 1):
        r = center.row + dr
        if not 0 <= r < grid.rows:
            continue
        for dc in (-1, 0, 1):
            t = TileIndex((center.col + dc) % grid.cols, r)
            if t != center and t not in out:
                out.append(t)
    return out


def classify_areas(attention: SpherePoint, grid: TileGrid = TileGrid()) -> AreaMap:
    hd = point_to_tile(attention, grid)
    sd = set(sd_neighbors(hd, grid))
    assignment = {}
    for t in grid.tiles():
        if t == hd:
            assignment[t] = AreaClass.HD
        elif t in sd:
            assignment[t] = AreaClass.SD
        else:
            assignment[t] = AreaClass.LD
    return AreaMap(assignment, hd, grid)


def _plan(areas: AreaMap, cat: TileCatalog, clip: int, levels: Mapping[AreaClass, int],
          feasible: bool, weights: QoeWeights) -> ClipPlan:
    choice = {t: cat.rung(clip, t, a, levels[a]) for t, a in areas.assignment.items()}
    bits = selection_bits(cat, clip, choice)
    q = clip_qoe({t: bvqa(r.bitrate_kbps, areas.assignment[t]) for t, r in choice.items()},
                 areas.assignment, weights)
    return ClipPlan(clip, choice, bits, q, feasible, dict(levels), areas)


def _check_inputs(areas: AreaMap, cat: TileCatalog, clip: int) -> None:
    if areas.grid != cat.grid:
        raise InvalidInputError("area map and catalog use different grids")
    if len(areas.assignment) != cat.grid.size:
        raise InvalidInputError("area map does not cover the grid")
    if not 0 <= clip < cat.clip_count:
        raise InvalidInputError(f"clip {clip} not in catalog")


def greedy_levels(areas: AreaMap, cat: TileCatalog, clip: int, budget: BandwidthBudget):
    """Walk the rung descent; returns (levels, feasible, path of bit totals)."""
    masks = {a: areas.mask(a) for a in AREA_ORDER}
    levels = {AreaClass.HD: 0, AreaClass.SD: 0, AreaClass.LD: 0}
    n_sd = cat.ladder.levels(AreaClass.SD)
    n_ld = cat.ladder.levels(AreaClass.LD)
    bits = layer_bits(cat, clip, masks, levels)
    path = [bits]
    while bits > budget.w_bits:
        if levels[AreaClass.LD] < n_ld - 1:
            levels[AreaClass.LD] += 1
        elif levels[AreaClass.SD] < n_sd - 1:
            levels[AreaClass.SD] += 1
        else:
            return levels, False, path
        bits = layer_bits(cat, clip, masks, levels)
        path.append(bits)
    return levels, True, path


def schedule_clip(areas: AreaMap, cat: TileCatalog, clip: int, budget: BandwidthBudget,
                  weights: QoeWeights = QoeWeights()) -> ClipPlan:
    """Greedy definition selection under a per-clip bit budget.

    Infeasible budgets yield the lowest SD/LD plan with ``feasible=False``.
    """
    _check_inputs(areas, cat, clip)
    levels, feasible, _ = greedy_levels(areas, cat, clip, budget)
    return _plan(areas, cat, clip, levels, feasible, weights)


def exhaustive_schedule(areas: AreaMap, cat: TileCatalog, clip: int, budget: BandwidthBudget,
                        weights: QoeWeights = QoeWeights()) -> ClipPlan:
    """Best class-rung assignment by enumeration.

    Ties on QoE go to fewer bits, then to the lexicographically smallest
    (LD level, SD level).
    """
    _check_inputs(areas, cat, clip)
    n_hd = cat.ladder.levels(AreaClass.HD)
    n_sd = cat.ladder.levels(AreaClass.SD)
    n_ld = cat.ladder.levels(AreaClass.LD)
    if n_hd * n_sd * n_ld > EXHAUSTIVE_LIMIT:
        raise CapacityError(f"{n_hd * n_sd * n_ld} class-rung assignments exceed {EXHAUSTIVE_LIMIT}")
    masks = {a: areas.mask(a) for a in AREA_ORDER}
    best = None
    best_key = None
    for ld, sd in itertools.product(range(n_ld), range(n_sd)):
        levels = {AreaClass.HD: 0, AreaClass.SD: sd, AreaClass.LD: ld}
        bits = layer_bits(cat, clip, masks, levels)
        if bits > budget.w_bits:
            continue
        plan = _plan(areas, cat, clip, levels, True, weights)
        if best is None:
            best, best_key = plan, (plan.scheduled_qoe, bits)
            continue
        q0, b0 = best_key
        if plan.scheduled_qoe > q0 + 1e-12 or (
                abs(plan.scheduled_qoe - q0) <= 1e-12 and bits < b0 * (1 - 1e-12)):
            best, best_key = plan, (plan.scheduled_qoe, bits)
    if best is None:
        levels = {AreaClass.HD: 0, AreaClass.SD: n_sd - 1, AreaClass.LD: n_ld - 1}
        return _plan(areas, cat, clip, levels, False, weights)
    return best


def feasible_assignments(areas: AreaMap, cat: TileCatalog, clip: int, budget: BandwidthBudget) -> int:
    masks = {a: areas.mask(a) for a in AREA_ORDER}
    n = 0
    for ld in range(cat.ladder.levels(AreaClass.LD)):
        for sd in range(cat.ladder.levels(AreaClass.SD)):
            levels = {AreaClass.HD: 0, AreaClass.SD: sd, AreaClass.LD: ld}
            if layer_bits(cat, clip, masks, levels) <= budget.w_bits:
                n += 1
    return n


def baseline_plan(scheme: str, head_attention: SpherePoint, gaze_attention: SpherePoint,
                  cat: TileCatalog, clip: int, weights: QoeWeights = QoeWeights()) -> ClipPlan:
    """Fixed compositions without budget enforcement.

    ``full`` sends every tile at HD; ``head_only`` / ``gaze_only`` send the
    attention tile at HD and everything else at the top SD rung.
    """
    if scheme not in SCHEMES:
        raise InvalidInputError(f"unknown baseline scheme {scheme!r}")
    grid = cat.grid
    if scheme == "full":
        comp = {t: AreaClass.HD for t in grid.tiles()}
    else:
        focus = point_to_tile(head_attention if scheme == "head_only" else gaze_attention, grid)
        comp = {t: (AreaClass.HD if t == focus else AreaClass.SD) for t in grid.tiles()}
    choice = {t: cat.rung(clip, t, a, 0) for t, a in comp.items()}
    bits = selection_bits(cat, clip, choice)
    q = clip_qoe({t: bvqa(r.bitrate_kbps, comp[t]) for t, r in choice.items()}, comp, weights)
    return ClipPlan(clip, choice, bits, q, True)


def compression_ratio(plan: ClipPlan, cat: TileCatalog, clip: Optional[int] = None) -> float:
    clip = plan.clip_index if clip is None else clip
    return 1.0 - plan.total_bits / all_hd_bits(cat, clip)


def format_plan(plan: ClipPlan) -> str:
    """Plan dump: ``clip col row class rung_kbps`` per tile plus a summary line."""
    lines = []
    for t in sorted(plan.choice, key=lambda t: (t.row, t.col)):
        r = plan.choice[t]
        lines.append(f"{plan.clip_index} {t.col} {t.row} {r.area.value} {r.bitrate_kbps:.3f}")
    lines.append(f"# total_bits={plan.total_bits:.0f} scheduled_qoe={plan.scheduled_qoe:.6f} "
                 f"feasible={int(plan.feasible)}")
    return "\n".join(lines) + "\n"
