"""Small builders shared by the test modules."""
from hvstream.geometry import SpherePoint, quat_from_yaw_pitch, sphere_to_dir
from hvstream.trace import Trace, TraceSample


def sample(t_ms, yaw, pitch=0.0):
    p = SpherePoint(yaw, pitch)
    return TraceSample.make(t_ms, quat_from_yaw_pitch(p.yaw_deg, p.pitch_deg), sphere_to_dir(p))


def trace_from_angles(times, yaws, pitches=None, rate_hz=10.0):
    pitches = pitches if pitches is not None else [0.0] * len(yaws)
    return Trace(tuple(sample(t, y, p) for t, y, p in zip(times, yaws, pitches)), rate_hz)


def yaw_diff(a, b):
    d = (a - b) % 360.0
    return min(d, 360.0 - d)


def random_instance(rng):
    """Small random scheduling problem: (areas, catalog, budget).

    Grids up to 4x3, 1-3 rungs for SD and LD, per-tile bitrates drawn
    independently, budget spread over and slightly beyond the feasible range.
    """
    import numpy as np

    from hvstream.catalog import DefinitionLadder, TileCatalog, all_hd_bits, lowest_bits
    from hvstream.geometry import TileGrid
    from hvstream.scheduler import BandwidthBudget, classify_areas

    grid = TileGrid(int(rng.integers(1, 5)), int(rng.integers(1, 4)))
    n_sd, n_ld = int(rng.integers(1, 4)), int(rng.integers(1, 4))
    hd = rng.uniform(500, 4000, size=(1, grid.rows, grid.cols, 1))
    sd = hd * np.sort(rng.uniform(0.3, 0.95, size=(1, grid.rows, grid.cols, n_sd)), axis=-1)[..., ::-1]
    ld = hd * np.sort(rng.uniform(0.02, 0.3, size=(1, grid.rows, grid.cols, n_ld)), axis=-1)[..., ::-1]
    table = np.concatenate([hd, sd, ld], axis=-1)
    ladder = DefinitionLadder.from_bitrates(2000, [2000 * r for r in np.linspace(0.9, 0.4, n_sd)],
                                            [200 * r for r in np.linspace(0.9, 0.1, n_ld)])
    cat = TileCatalog(grid, 1, ladder, table)
    att = SpherePoint(float(rng.uniform(-180, 180)), float(rng.uniform(-90, 90)))
    areas = classify_areas(att, grid)
    lo, hi = lowest_bits(cat, 0), all_hd_bits(cat, 0)
    budget = BandwidthBudget(float(rng.uniform(0.5 * lo, 1.1 * hi)))
    return areas, cat, budget
