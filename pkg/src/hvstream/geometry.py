"""Sphere and equirectangular geometry.

Coordinate convention (used everywhere in the package):

* right-handed frame, ``+x`` is yaw 0 / pitch 0, ``+z`` is up;
* yaw grows counterclockwise seen from ``+z`` and lives in ``[-180, 180)``;
* pitch is elevation above the ``xy`` plane, in ``[-90, 90]``;
* at the poles the yaw is canonicalized to 0.

The equirectangular frame has ``u`` growing with yaw from the left edge
(yaw -180) and ``v`` growing downward from the top edge (pitch +90).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, NamedTuple

from .errors import DegenerateMeanError, InvalidInputError

_UNIT_TOL = 1e-9
_MEAN_MIN_NORM = 1e-9


class UnitVec3(NamedTuple):
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    def norm(self) -> float:
        return math.sqrt(self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z)

    def normalized(self) -> "Quaternion":
        n = self.norm()
        if not n > 0.0 or not math.isfinite(n):
            raise InvalidInputError("quaternion has zero or non-finite norm")
        if n == 1.0:
            return self
        return Quaternion(self.w / n, self.x / n, self.y / n, self.z / n)

    def __mul__(self, o: "Quaternion") -> "Quaternion":
        return Quaternion(
            self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        )

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.w, self.x, self.y, self.z)


def _wrap_yaw(yaw: float) -> float:
    y = math.fmod(yaw + 180.0, 360.0)
    if y < 0.0:
        y += 360.0
    y -= 180.0
    # fmod rounding can land exactly on the open end
    if y >= 180.0:
        y -= 360.0
    return y + 0.0


@dataclass(frozen=True)
class SpherePoint:
    """A direction on the viewing sphere, in degrees.

    Yaw is wrapped into ``[-180, 180)`` on construction and forced to 0 at
    the poles, so two points compare equal iff they name the same direction
    in the same canonical form.
    """

    yaw_deg: float
    pitch_deg: float

    def __post_init__(self):
        if not (math.isfinite(self.yaw_deg) and math.isfinite(self.pitch_deg)):
            raise InvalidInputError("sphere point coordinates must be finite")
        if not -90.0 <= self.pitch_deg <= 90.0:
            raise InvalidInputError(f"pitch {self.pitch_deg} outside [-90, 90]")
        yaw = 0.0 if abs(self.pitch_deg) == 90.0 else _wrap_yaw(self.yaw_deg)
        object.__setattr__(self, "yaw_deg", yaw)
        object.__setattr__(self, "pitch_deg", self.pitch_deg + 0.0)


@dataclass(frozen=True)
class TileGrid:
    cols: int = 36
    rows: int = 36

    def __post_init__(self):
        if int(self.cols) != self.cols or int(self.rows) != self.rows or self.cols < 1 or self.rows < 1:
            raise InvalidInputError(f"tile grid must be positive integers, got {self.cols}x{self.rows}")

    @property
    def size(self) -> int:
        return self.cols * self.rows

    def tiles(self) -> list["TileIndex"]:
        """All tiles, row-major."""
        return [TileIndex(c, r) for r in range(self.rows) for c in range(self.cols)]


class TileIndex(NamedTuple):
    col: int
    row: int


def quat_from_yaw_pitch(yaw_deg: float, pitch_deg: float) -> Quaternion:
    """Orientation whose forward axis points at (yaw, pitch).

    Pitch is applied first about ``-y`` (so positive pitch tilts ``+x``
    toward ``+z``), then yaw about ``+z``.
    """
    hy = math.radians(yaw_deg) / 2.0
    hp = -math.radians(pitch_deg) / 2.0
    q_yaw = Quaternion(math.cos(hy), 0.0, 0.0, math.sin(hy))
    q_pitch = Quaternion(math.cos(hp), 0.0, math.sin(hp), 0.0)
    return q_yaw * q_pitch


def quat_to_forward(q: Quaternion) -> UnitVec3:
    """Rotate the reference forward axis ``+x`` by ``q``."""
    w, x, y, z = q.normalized().as_tuple()
    v = (1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y + w * z), 2.0 * (x * z - w * y))
    return normalize(v)


def normalize(v: Iterable[float]) -> UnitVec3:
    x, y, z = (float(c) for c in v)
    n = math.sqrt(x * x + y * y + z * z)
    if not n > 0.0 or not math.isfinite(n):
        raise InvalidInputError("cannot normalize a zero or non-finite vector")
    return UnitVec3(x / n, y / n, z / n)


def dir_to_sphere(d: UnitVec3) -> SpherePoint:
    x, y, z = d
    pitch = math.degrees(math.asin(max(-1.0, min(1.0, z))))
    yaw = math.degrees(math.atan2(y, x))
    return SpherePoint(yaw, pitch)


def sphere_to_dir(p: SpherePoint) -> UnitVec3:
    yaw = math.radians(p.yaw_deg)
    pitch = math.radians(p.pitch_deg)
    cp = math.cos(pitch)
    return UnitVec3(cp * math.cos(yaw), cp * math.sin(yaw), math.sin(pitch))


def sphere_to_uv(p: SpherePoint) -> tuple[float, float]:
    return (p.yaw_deg + 180.0) / 360.0, (90.0 - p.pitch_deg) / 180.0


def uv_to_sphere(u: float, v: float) -> SpherePoint:
    return SpherePoint(u * 360.0 - 180.0, 90.0 - v * 180.0)


def point_to_tile(p: SpherePoint, g: TileGrid) -> TileIndex:
    u, v = sphere_to_uv(p)
    col = min(int(math.floor(u * g.cols)), g.cols - 1)
    row = min(int(math.floor(v * g.rows)), g.rows - 1)
    return TileIndex(max(col, 0), max(row, 0))


def angular_distance(a: SpherePoint, b: SpherePoint) -> float:
    """Great-circle angle between two points, in degrees, in [0, 180]."""
    ua = sphere_to_dir(a)
    ub = sphere_to_dir(b)
    cx = ua.y * ub.z - ua.z * ub.y
    cy = ua.z * ub.x - ua.x * ub.z
    cz = ua.x * ub.y - ua.y * ub.x
    dot = ua.x * ub.x + ua.y * ub.y + ua.z * ub.z
    return math.degrees(math.atan2(math.sqrt(cx * cx + cy * cy + cz * cz), dot))


def spherical_mean(points: Iterable[SpherePoint]) -> SpherePoint:
    """Direction of the normalized resultant of the points' unit vectors."""
    sx = sy = sz = 0.0
    n = 0
    for p in points:
        d = sphere_to_dir(p)
        sx += d.x
        sy += d.y
        sz += d.z
        n += 1
    if n == 0:
        raise InvalidInputError("spherical mean of an empty set")
    norm = math.sqrt(sx * sx + sy * sy + sz * sz)
    if norm <= _MEAN_MIN_NORM:
        raise DegenerateMeanError(f"resultant norm {norm:.3g} too small for a mean direction")
    return dir_to_sphere(UnitVec3(sx / norm, sy / norm, sz / norm))


def slerp_vec(a: UnitVec3, b: UnitVec3, t: float) -> UnitVec3:
    """Constant-speed interpolation along the great circle from a to b."""
    if t == 0.0:
        return a
    if t == 1.0:
        return b
    dot = max(-1.0, min(1.0, a.x * b.x + a.y * b.y + a.z * b.z))
    theta = math.acos(dot)
    if theta < 1e-7:
        return normalize((a.x + t * (b.x - a.x), a.y + t * (b.y - a.y), a.z + t * (b.z - a.z)))
    s = math.sin(theta)
    if s < 1e-12:
        raise InvalidInputError("slerp between antipodal directions is undefined")
    wa = math.sin((1.0 - t) * theta) / s
    wb = math.sin(t * theta) / s
    return normalize((wa * a.x + wb * b.x, wa * a.y + wb * b.y, wa * a.z + wb * b.z))


def slerp_quat(a: Quaternion, b: Quaternion, t: float) -> Quaternion:
    """Shortest-arc quaternion slerp (handles the q / -q double cover)."""
    if t == 0.0:
        return a
    if t == 1.0:
        return b
    qa = a.as_tuple()
    qb = b.as_tuple()
    dot = sum(p * q for p, q in zip(qa, qb))
    if dot < 0.0:
        qb = tuple(-q for q in qb)
        dot = -dot
    if dot > 0.9995:
        out = [p + t * (q - p) for p, q in zip(qa, qb)]
    else:
        theta = math.acos(min(dot, 1.0))
        s = math.sin(theta)
        wa = math.sin((1.0 - t) * theta) / s
        wb = math.sin(t * theta) / s
        out = [wa * p + wb * q for p, q in zip(qa, qb)]
    return Quaternion(*out).normalized()


def tangent_basis(d: UnitVec3) -> tuple[UnitVec3, UnitVec3]:
    """Two unit vectors orthogonal to ``d`` and to each other."""
    # pick the world axis least aligned with d as a helper
    ax = min(range(3), key=lambda i: abs(d[i]))
    helper = [0.0, 0.0, 0.0]
    helper[ax] = 1.0
    e1 = normalize((
        d.y * helper[2] - d.z * helper[1],
        d.z * helper[0] - d.x * helper[2],
        d.x * helper[1] - d.y * helper[0],
    ))
    e2 = UnitVec3(
        d.y * e1.z - d.z * e1.y,
        d.z * e1.x - d.x * e1.z,
        d.x * e1.y - d.y * e1.x,
    )
    return e1, e2


def is_unit(v: Iterable[float], tol: float = _UNIT_TOL) -> bool:
    x, y, z = v
    return abs(math.sqrt(x * x + y * y + z * z) - 1.0) <= tol
