import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import yaw_diff
from hvstream.errors import DegenerateMeanError, InvalidInputError
from hvstream.geometry import (
    Quaternion,
    SpherePoint,
    TileGrid,
    TileIndex,
    UnitVec3,
    angular_distance,
    dir_to_sphere,
    is_unit,
    normalize,
    point_to_tile,
    quat_from_yaw_pitch,
    quat_to_forward,
    slerp_quat,
    slerp_vec,
    spherical_mean,
    sphere_to_dir,
    sphere_to_uv,
    tangent_basis,
    uv_to_sphere,
)

yaws = st.floats(-180, 180, exclude_max=True, allow_nan=False)
pitches = st.floats(-90, 90, allow_nan=False)
points = st.builds(SpherePoint, yaws, pitches)


class TestSpherePoint:
    @pytest.mark.parametrize("yaw, expect", [(180, -180), (540, -180), (-190, 170), (359.5, -0.5)])
    def test_yaw_wraps(self, yaw, expect):
        assert SpherePoint(yaw, 0).yaw_deg == pytest.approx(expect)

    @pytest.mark.parametrize("pitch", [90, -90])
    def test_pole_canonical(self, pitch):
        assert SpherePoint(123.0, pitch) == SpherePoint(0.0, pitch)
        assert SpherePoint(123.0, pitch).yaw_deg == 0.0

    @pytest.mark.parametrize("pitch", [90.5, -91, float("nan")])
    def test_bad_pitch(self, pitch):
        with pytest.raises(InvalidInputError):
            SpherePoint(0, pitch)


class TestQuaternion:
    def test_identity_forward(self):
        assert quat_to_forward(Quaternion(1, 0, 0, 0)) == pytest.approx((1, 0, 0))

    def test_quarter_turn_about_z(self):
        h = math.sqrt(0.5)
        assert quat_to_forward(Quaternion(h, 0, 0, h)) == pytest.approx((0, 1, 0), abs=1e-9)

    def test_double_cover(self):
        q = Quaternion(0.3, -0.5, 0.2, 0.7)
        nq = Quaternion(-0.3, 0.5, -0.2, -0.7)
        assert quat_to_forward(q) == pytest.approx(quat_to_forward(nq), abs=1e-12)

    def test_zero_norm(self):
        with pytest.raises(InvalidInputError):
            quat_to_forward(Quaternion(0, 0, 0, 0))

    @given(yaws, st.floats(-89, 89))
    def test_yaw_pitch_roundtrip(self, yaw, pitch):
        p = dir_to_sphere(quat_to_forward(quat_from_yaw_pitch(yaw, pitch)))
        assert p.pitch_deg == pytest.approx(pitch, abs=1e-9)
        assert yaw_diff(p.yaw_deg, yaw) < 1e-8

    def test_slerp_quat_endpoints(self):
        a, b = quat_from_yaw_pitch(0, 0), quat_from_yaw_pitch(90, 0)
        mid = quat_to_forward(slerp_quat(a, b, 0.5))
        assert dir_to_sphere(mid).yaw_deg == pytest.approx(45)


class TestDirections:
    @pytest.mark.parametrize("d, yaw, pitch", [
        ((1, 0, 0), 0, 0),
        ((0, 0, 1), 0, 90),
        ((-1, 0, 0), -180, 0),
        ((0, 1, 0), 90, 0),
    ])
    def test_examples(self, d, yaw, pitch):
        p = dir_to_sphere(UnitVec3(*d))
        assert (p.yaw_deg, p.pitch_deg) == pytest.approx((yaw, pitch))

    def test_normalize_idempotent(self):
        v = normalize((3, 4, 12))
        assert abs(v.norm() - 1) < 1e-12
        assert normalize(v) == pytest.approx(v, abs=1e-15)
        assert is_unit(v)

    def test_normalize_zero(self):
        with pytest.raises(InvalidInputError):
            normalize((0, 0, 0))

    def test_tangent_basis_orthonormal(self):
        d = normalize((0.2, -0.4, 0.9))
        e1, e2 = tangent_basis(d)
        m = np.array([d, e1, e2])
        np.testing.assert_allclose(m @ m.T, np.eye(3), atol=1e-12)


class TestUV:
    @pytest.mark.parametrize("yaw, pitch, uv", [
        (0, 0, (0.5, 0.5)),
        (-180, 0, (0.0, 0.5)),
        # yaw is canonicalized to 0 at the pole, so the corner maps to mid-top
        (-180, 90, (0.5, 0.0)),
        (90, -45, (0.75, 0.75)),
    ])
    def test_examples(self, yaw, pitch, uv):
        assert sphere_to_uv(SpherePoint(yaw, pitch)) == pytest.approx(uv)

    @given(yaws, st.floats(-89.9, 89.9))
    def test_inverse(self, yaw, pitch):
        p = SpherePoint(yaw, pitch)
        q = uv_to_sphere(*sphere_to_uv(p))
        assert q.pitch_deg == pytest.approx(pitch, abs=1e-9)
        assert yaw_diff(q.yaw_deg, p.yaw_deg) < 1e-9


class TestTiles:
    @pytest.mark.parametrize("yaw, pitch, tile", [
        (0, 0, (18, 18)),
        (-180, 89.99, (0, 0)),
        (-180, 90, (18, 0)),
        (179.99, -89.99, (35, 35)),
        (0, -90, (18, 35)),
    ])
    def test_examples(self, yaw, pitch, tile):
        assert point_to_tile(SpherePoint(yaw, pitch), TileGrid()) == TileIndex(*tile)

    @given(points, st.integers(1, 50), st.integers(1, 50))
    def test_in_bounds(self, p, cols, rows):
        t = point_to_tile(p, TileGrid(cols, rows))
        assert 0 <= t.col < cols and 0 <= t.row < rows

    def test_grid_order(self):
        g = TileGrid(3, 2)
        assert g.size == 6
        assert g.tiles()[:4] == [TileIndex(0, 0), TileIndex(1, 0), TileIndex(2, 0), TileIndex(0, 1)]


class TestDistanceAndMean:
    @pytest.mark.parametrize("a, b, d", [
        ((0, 0), (10, 0), 10),
        ((0, 90), (137, 90), 0),
        ((0, 0), (90, 0), 90),
        ((175, 0), (-175, 0), 10),
    ])
    def test_distance_examples(self, a, b, d):
        assert angular_distance(SpherePoint(*a), SpherePoint(*b)) == pytest.approx(d, abs=1e-9)

    @settings(max_examples=300)
    @given(points, points, points)
    def test_metric(self, a, b, c):
        ab, bc, ac = angular_distance(a, b), angular_distance(b, c), angular_distance(a, c)
        assert ab == pytest.approx(angular_distance(b, a), abs=1e-9)
        assert ac <= ab + bc + 1e-6

    def test_mean_examples(self):
        m = spherical_mean([SpherePoint(10, 0), SpherePoint(-10, 0)])
        assert (m.yaw_deg, m.pitch_deg) == pytest.approx((0, 0), abs=1e-12)
        s = spherical_mean([SpherePoint(10, 0)])
        assert s.yaw_deg == pytest.approx(10)

    @given(points, st.integers(1, 20))
    def test_mean_of_copies(self, p, n):
        assert angular_distance(spherical_mean([p] * n), p) < 1e-6

    def test_mean_errors(self):
        with pytest.raises(InvalidInputError):
            spherical_mean([])
        with pytest.raises(DegenerateMeanError):
            spherical_mean([SpherePoint(0, 0), SpherePoint(180, 0)])


class TestSlerp:
    def test_endpoints_exact(self):
        a, b = normalize((1, 0, 0)), normalize((0, 1, 0))
        assert slerp_vec(a, b, 0) == a and slerp_vec(a, b, 1) == b

    def test_midpoint(self):
        a, b = normalize((1, 0, 0)), normalize((0, 1, 0))
        m = slerp_vec(a, b, 0.5)
        assert dir_to_sphere(m).yaw_deg == pytest.approx(45)
        assert is_unit(m)

    def test_antipodal(self):
        with pytest.raises(InvalidInputError):
            slerp_vec(normalize((1, 0, 0)), normalize((-1, 0, 0)), 0.5)
