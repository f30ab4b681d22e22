"""Per-clip, per-tile bitrate catalog standing in for pre-sliced video.

Manifest schema (JSON, keys sorted, compact separators, reals rounded to
three fractional digits, trailing newline)::

    {
      "clip_count": 2,
      "clip_duration_ms": 1000,
      "format": "hvstream-catalog/1",
      "grid": {"cols": 36, "rows": 36},
      "ladder": {"HD": [kbps], "LD": [kbps, ...], "SD": [kbps, ...]},
      "table": {"<clip>": {"<col>,<row>": {"HD": [..], "LD": [..], "SD": [..]}}}
    }

``ladder`` holds nominal per-tile bitrates; ``table`` holds the actual
bitrate of every (clip, tile, rung).  Within a class, rungs are listed
from highest to lowest bitrate and must strictly decrease.  HD has
exactly one rung.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import IO, Mapping, Sequence, Union

import numpy as np

from .errors import InvalidInputError, ValidationError
from .geometry import TileGrid, TileIndex
from .qoe import AREA_ORDER, AreaClass

FORMAT_TAG = "hvstream-catalog/1"


@dataclass(frozen=True)
class Rung:
    area: AreaClass
    bitrate_kbps: float
    level: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.bitrate_kbps) and self.bitrate_kbps > 0):
            raise ValidationError(f"rung bitrate must be finite and positive, got {self.bitrate_kbps}")


def _check_descending(values: Sequence[float], what: str) -> None:
    for a, b in zip(values, values[1:]):
        if not b < a:
            raise ValidationError(f"{what}: rungs must strictly decrease ({a} then {b})")


@dataclass(frozen=True)
class DefinitionLadder:
    hd: Rung
    sd: tuple[Rung, ...]
    ld: tuple[Rung, ...]

    def __post_init__(self):
        if not self.sd or not self.ld:
            raise ValidationError("SD and LD need at least one rung each")
        for area, rungs in ((AreaClass.HD, (self.hd,)), (AreaClass.SD, self.sd), (AreaClass.LD, self.ld)):
            for k, r in enumerate(rungs):
                if r.area != area or r.level != k:
                    raise ValidationError(f"{area.value} rung {k} mislabeled as {r.area.value}[{r.level}]")
            _check_descending([r.bitrate_kbps for r in rungs], f"{area.value} ladder")

    @classmethod
    def from_bitrates(cls, hd: float, sd: Sequence[float], ld: Sequence[float]) -> "DefinitionLadder":
        return cls(
            Rung(AreaClass.HD, float(hd), 0),
            tuple(Rung(AreaClass.SD, float(b), k) for k, b in enumerate(sd)),
            tuple(Rung(AreaClass.LD, float(b), k) for k, b in enumerate(ld)),
        )

    def rungs(self, area: AreaClass) -> tuple[Rung, ...]:
        return {AreaClass.HD: (self.hd,), AreaClass.SD: self.sd, AreaClass.LD: self.ld}[AreaClass(area)]

    def levels(self, area: AreaClass) -> int:
        return len(self.rungs(area))


class TileCatalog:
    """Immutable bitrate table indexed by (clip, row, col, rung slot).

    Rung slots run HD, SD[0..], LD[0..].
    """

    def __init__(self, grid: TileGrid, clip_count: int, ladder: DefinitionLadder,
                 table: np.ndarray, clip_duration_ms: int = 1000):
        if int(clip_count) != clip_count or clip_count < 1:
            raise ValidationError("clip count must be a positive integer")
        if int(clip_duration_ms) != clip_duration_ms or clip_duration_ms <= 0:
            raise ValidationError("clip duration must be a positive integer number of ms")
        self.grid = grid
        self.clip_count = int(clip_count)
        self.clip_duration_ms = int(clip_duration_ms)
        self.ladder = ladder
        self._offsets = {AreaClass.HD: 0, AreaClass.SD: 1, AreaClass.LD: 1 + len(ladder.sd)}
        slots = 1 + len(ladder.sd) + len(ladder.ld)
        table = np.array(table, dtype=float)
        if table.shape != (self.clip_count, grid.rows, grid.cols, slots):
            raise ValidationError(f"bitrate table shape {table.shape} does not match catalog dimensions")
        if not np.all(np.isfinite(table)) or np.any(table <= 0):
            raise ValidationError("bitrates must be finite and positive")
        for area in (AreaClass.SD, AreaClass.LD):
            lo = self._offsets[area]
            seg = table[..., lo:lo + ladder.levels(area)]
            bad = np.argwhere(np.diff(seg, axis=-1) >= 0)
            if bad.size:
                c, r, col, k = bad[0]
                raise ValidationError(
                    f"clip {c} tile {col},{r}: {area.value} rungs not strictly descending at level {k + 1}")
        table.setflags(write=False)
        self.table = table

    def slot(self, area: AreaClass, level: int) -> int:
        area = AreaClass(area)
        if not 0 <= level < self.ladder.levels(area):
            raise InvalidInputError(f"{area.value} has no rung {level}")
        return self._offsets[area] + level

    def bitrate(self, clip: int, tile: TileIndex, area: AreaClass, level: int) -> float:
        self._check_clip(clip)
        return float(self.table[clip, tile.row, tile.col, self.slot(area, level)])

    def rung(self, clip: int, tile: TileIndex, area: AreaClass, level: int) -> Rung:
        """The rung as delivered for one tile, carrying that tile's bitrate."""
        return Rung(AreaClass(area), self.bitrate(clip, tile, area, level), level)

    def class_layer(self, clip: int, area: AreaClass, level: int) -> np.ndarray:
        """(rows, cols) bitrates of one rung over the whole grid."""
        self._check_clip(clip)
        return self.table[clip, :, :, self.slot(area, level)]

    def _check_clip(self, clip: int) -> None:
        if not 0 <= clip < self.clip_count:
            raise InvalidInputError(f"clip {clip} outside catalog of {self.clip_count} clips")

    def __eq__(self, other):
        if not isinstance(other, TileCatalog):
            return NotImplemented
        return (self.grid == other.grid and self.clip_count == other.clip_count
                and self.clip_duration_ms == other.clip_duration_ms
                and self.ladder == other.ladder and np.array_equal(self.table, other.table))

    __hash__ = None


def selection_bits(cat: TileCatalog, clip: int, choice: Mapping[TileIndex, Rung]) -> float:
    """Size of one clip composed from the chosen rungs, in bits."""
    tiles = cat.grid.tiles()
    if len(choice) != len(tiles) or any(t not in choice for t in tiles):
        raise InvalidInputError("choice does not cover every tile of the grid")
    kbps = math.fsum(cat.bitrate(clip, t, choice[t].area, choice[t].level) for t in tiles)
    return kbps * cat.clip_duration_ms


def layer_bits(cat: TileCatalog, clip: int, mask_by_area: Mapping[AreaClass, np.ndarray],
               level_by_area: Mapping[AreaClass, int]) -> float:
    """Bits of a class-level plan, given boolean (rows, cols) masks per class."""
    total = 0.0
    for area, mask in mask_by_area.items():
        if mask.any():
            total += float(cat.class_layer(clip, area, level_by_area[area])[mask].sum())
    return total * cat.clip_duration_ms


# ---------------------------------------------------------------- synthesis

def _check_ratios(ratios: Sequence[float], what: str) -> tuple[float, ...]:
    rs = tuple(float(r) for r in ratios)
    if not rs:
        raise InvalidInputError(f"{what} ratios must not be empty")
    if any(not 0.0 < r < 1.0 for r in rs):
        raise InvalidInputError(f"{what} ratios must lie in (0, 1), got {rs}")
    if any(b >= a for a, b in zip(rs, rs[1:])):
        raise InvalidInputError(f"{what} ratios must strictly decrease, got {rs}")
    return rs


def synth_catalog(grid: TileGrid = TileGrid(), clips: int = 10, base_kbps: float = 40000.0,
                  sd_ratios: Sequence[float] = (0.66, 0.4), ld_ratios: Sequence[float] = (0.12, 0.05),
                  jitter: float = 0.0, seed: int = 0, clip_duration_ms: int = 1000) -> TileCatalog:
    """Catalog whose HD tile rate is ``base_kbps`` split evenly over the grid.

    Each (clip, tile) HD rate is scaled by a seeded factor in
    ``[1 - jitter, 1 + jitter]``; SD and LD rungs are that rate times the
    ratios.
    """
    sd = _check_ratios(sd_ratios, "SD")
    ld = _check_ratios(ld_ratios, "LD")
    if not 0.0 <= jitter < 0.5:
        raise InvalidInputError("jitter must lie in [0, 0.5)")
    if not (math.isfinite(base_kbps) and base_kbps > 0):
        raise InvalidInputError("base bitrate must be positive")
    if int(clips) != clips or clips < 1:
        raise InvalidInputError("clip count must be a positive integer")
    per_tile = base_kbps / grid.size
    rng = np.random.default_rng(seed)
    hd = np.full((clips, grid.rows, grid.cols), per_tile)
    if jitter > 0:
        hd = hd * (1.0 + rng.uniform(-jitter, jitter, size=hd.shape))
    ratios = np.array((1.0,) + sd + ld)
    table = hd[..., None] * ratios
    ladder = DefinitionLadder.from_bitrates(per_tile, [per_tile * r for r in sd], [per_tile * r for r in ld])
    return TileCatalog(grid, clips, ladder, table, clip_duration_ms)


# ---------------------------------------------------------------- manifest I/O

def _r3(v: float) -> float:
    return round(float(v), 3) + 0.0


def manifest_dict(cat: TileCatalog) -> dict:
    ladder = {a.value: [_r3(r.bitrate_kbps) for r in cat.ladder.rungs(a)] for a in AREA_ORDER}
    table = {}
    for c in range(cat.clip_count):
        per_clip = {}
        for t in cat.grid.tiles():
            per_clip[f"{t.col},{t.row}"] = {
                a.value: [_r3(cat.table[c, t.row, t.col, cat.slot(a, k)]) for k in range(cat.ladder.levels(a))]
                for a in AREA_ORDER
            }
        table[str(c)] = per_clip
    return {
        "clip_count": cat.clip_count,
        "clip_duration_ms": cat.clip_duration_ms,
        "format": FORMAT_TAG,
        "grid": {"cols": cat.grid.cols, "rows": cat.grid.rows},
        "ladder": ladder,
        "table": table,
    }


def serialize_manifest(cat: TileCatalog) -> bytes:
    text = json.dumps(manifest_dict(cat), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return (text + "\n").encode("utf-8")


def save_manifest(cat: TileCatalog, dest: Union[str, IO[bytes]]) -> None:
    data = serialize_manifest(cat)
    if isinstance(dest, str):
        with open(dest, "wb") as fh:
            fh.write(data)
    else:
        dest.write(data)


def _need(obj, key, what):
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationError(f"missing entry: {what}")
    return obj[key]


def _as_int(v, what) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ValidationError(f"{what} must be an integer")
    return v


def load_manifest(source: Union[bytes, str, IO[bytes]]) -> TileCatalog:
    if isinstance(source, bytes):
        raw = source
    elif isinstance(source, str):
        with open(source, "rb") as fh:
            raw = fh.read()
    else:
        raw = source.read()
    try:
        doc = json.loads(raw)
    except ValueError as exc:
        raise ValidationError(f"manifest is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError("manifest must be a JSON object")
    if doc.get("format", FORMAT_TAG) != FORMAT_TAG:
        raise ValidationError(f"unsupported manifest format {doc.get('format')!r}")

    g = _need(doc, "grid", "grid")
    grid = TileGrid(_as_int(_need(g, "cols", "grid.cols"), "grid.cols"),
                    _as_int(_need(g, "rows", "grid.rows"), "grid.rows"))
    clip_count = _as_int(_need(doc, "clip_count", "clip_count"), "clip_count")
    duration = _as_int(_need(doc, "clip_duration_ms", "clip_duration_ms"), "clip_duration_ms")
    if clip_count < 1:
        raise ValidationError("clip_count must be positive")
    lad = _need(doc, "ladder", "ladder")
    levels = {}
    ladder_vals = {}
    for a in AREA_ORDER:
        vals = _need(lad, a.value, f"ladder.{a.value}")
        if not isinstance(vals, list) or not vals:
            raise ValidationError(f"ladder.{a.value} must be a non-empty list")
        ladder_vals[a] = [float(v) for v in vals]
        levels[a] = len(vals)
    if levels[AreaClass.HD] != 1:
        raise ValidationError("HD must have exactly one rung")
    ladder = DefinitionLadder.from_bitrates(ladder_vals[AreaClass.HD][0], ladder_vals[AreaClass.SD],
                                            ladder_vals[AreaClass.LD])

    table_doc = _need(doc, "table", "table")
    slots = 1 + levels[AreaClass.SD] + levels[AreaClass.LD]
    table = np.empty((clip_count, grid.rows, grid.cols, slots))
    offsets = {AreaClass.HD: 0, AreaClass.SD: 1, AreaClass.LD: 1 + levels[AreaClass.SD]}
    for c in range(clip_count):
        clip_doc = _need(table_doc, str(c), f"clip {c}")
        for t in grid.tiles():
            tkey = f"{t.col},{t.row}"
            tile_doc = _need(clip_doc, tkey, f"clip {c} tile {tkey}")
            for a in AREA_ORDER:
                vals = _need(tile_doc, a.value, f"clip {c} tile {tkey} {a.value}")
                if not isinstance(vals, list):
                    raise ValidationError(f"clip {c} tile {tkey} {a.value} must be a list")
                for k in range(levels[a]):
                    if k >= len(vals):
                        raise ValidationError(f"missing entry: clip {c} tile {tkey} {a.value}[{k}]")
                    v = vals[k]
                    if isinstance(v, bool) or not isinstance(v, (int, float)):
                        raise ValidationError(f"clip {c} tile {tkey} {a.value}[{k}] is not a number")
                    table[c, t.row, t.col, offsets[a] + k] = float(v)
                if len(vals) > levels[a]:
                    raise ValidationError(f"clip {c} tile {tkey} {a.value} has extra rungs")
        if len(clip_doc) != grid.size:
            raise ValidationError(f"clip {c} lists tiles outside the grid")
    if len(table_doc) != clip_count:
        raise ValidationError("table lists clips beyond clip_count")
    return TileCatalog(grid, clip_count, ladder, table, duration)


def all_hd_bits(cat: TileCatalog, clip: int) -> float:
    return float(cat.class_layer(clip, AreaClass.HD, 0).sum()) * cat.clip_duration_ms


def lowest_bits(cat: TileCatalog, clip: int) -> float:
    """Bits of the all-tiles-at-lowest-LD selection."""
    return float(cat.class_layer(clip, AreaClass.LD, cat.ladder.levels(AreaClass.LD) - 1).sum()) * cat.clip_duration_ms
