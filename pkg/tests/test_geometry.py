import math

import numpy as np
import pytest

from panelmg import map_to_sphere, panel_grid, vertical_levels, cell_geometry
from panelmg.geometry import build_factors


def test_map_reference_points():
    assert np.allclose(map_to_sphere(0.0, 0.0, 1.0), (0.0, 0.0, 1.0))
    s = math.sqrt(2.0) / 2.0
    assert np.allclose(map_to_sphere(1.0, 0.0, 1.0), (s, 0.0, s))
    assert np.allclose(map_to_sphere(0.0, 1.0, 1.0), (0.0, s, s))


def test_map_radius_preserved():
    rng = np.random.default_rng(42)
    xi1 = rng.uniform(-1, 1, 1000)
    xi2 = rng.uniform(-1, 1, 1000)
    r = rng.uniform(1.0, 1.01, 1000)
    x, y, z = map_to_sphere(xi1, xi2, r)
    norm = np.sqrt(x * x + y * y + z * z)
    assert np.max(np.abs(norm - r) / r) <= 1e-14


def test_map_rejects_out_of_range():
    with pytest.raises(ValueError):
        map_to_sphere(1.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        map_to_sphere(0.0, -1.01, 1.0)
    with pytest.raises(ValueError):
        map_to_sphere(0.0, 0.0, 0.99)
    with pytest.raises(ValueError):
        map_to_sphere(0.0, 0.0, 1.02, depth=0.01)


def test_vertical_levels():
    lv = vertical_levels(128, 0.01)
    assert lv[0] == 1.0
    assert lv[128] == 1.01
    assert abs(lv[64] - 1.0025) < 1e-15
    assert np.allclose(vertical_levels(2, 0.01), [1.0, 1.0025, 1.01])
    # Linear grading: spacing strictly increasing with height.
    assert np.all(np.diff(np.diff(lv)) > 0.0)
    with pytest.raises(ValueError):
        vertical_levels(0, 0.01)


def test_grid_validation():
    with pytest.raises(ValueError):
        panel_grid(3, 4)
    with pytest.raises(ValueError):
        panel_grid(8, 4, levels=np.array([1.0, 1.2, 1.1, 1.3, 1.01]))
    with pytest.raises(ValueError):
        panel_grid(8, 2, depth=0.01, levels=np.array([1.0, 1.004, 1.011]))
    g = panel_grid(8, 4)
    assert g.dxi * g.nx == 2.0


def test_flat_unit_cells():
    g = panel_grid(2, 1, depth=1.0, flat_mode=True)
    for i in range(2):
        for j in range(2):
            assert cell_geometry(g, i, j, 0).volume == pytest.approx(1.0, rel=1e-14)
    f = build_factors(g)
    assert np.allclose(f.volumes(), 1.0)


def test_panel_volume_matches_shell():
    g = panel_grid(64, 16, depth=0.01)
    total = build_factors(g).volumes().sum()
    shell = (4.0 * math.pi / 3.0) * ((1.01) ** 3 - 1.0) / 6.0
    assert abs(total - shell) / shell < 0.005


def test_center_cells_have_largest_horizontal_faces():
    g = panel_grid(16, 2, depth=0.01)
    f = build_factors(g)
    c = g.nx // 2
    imax, jmax = np.unravel_index(np.argmax(f.av), f.av.shape)
    assert imax in (c - 1, c) and jmax in (c - 1, c)
    assert f.av.max() == pytest.approx(f.av[c, c], rel=1e-12)


def test_cell_area_ratio_converges():
    ratios = []
    for nx in (256, 512):
        f = build_factors(panel_grid(nx, 1, depth=0.01))
        ratios.append(f.av.max() / f.av.min())
    assert abs(ratios[0] - ratios[1]) / ratios[1] < 0.01


def test_face_factor_symmetry():
    g = panel_grid(8, 4, depth=0.01)
    rng = np.random.default_rng(1)
    for _ in range(10):
        i, j, k = rng.integers(0, 7), rng.integers(0, 7), rng.integers(0, 4)
        a = cell_geometry(g, i, j, k)
        b = cell_geometry(g, i + 1, j, k)
        assert a.face_area_xi1[1] == b.face_area_xi1[0]
        assert a.center_dist_xi1[1] == b.center_dist_xi1[0]
        c = cell_geometry(g, i, j + 1, k)
        assert a.face_area_xi2[1] == c.face_area_xi2[0]
        assert a.center_dist_xi2[1] == c.center_dist_xi2[0]


def test_boundary_flags_and_nan_distances():
    g = panel_grid(4, 2, depth=0.01)
    c = cell_geometry(g, 0, 3, 0)
    assert c.boundary_xi1 == (True, False)
    assert c.boundary_xi2 == (False, True)
    assert c.boundary_r == (True, False)
    assert math.isnan(c.center_dist_xi1[0])
    assert math.isnan(c.center_dist_xi2[1])
    assert math.isnan(c.center_dist_r[0])
    assert c.face_area_xi1[0] > 0.0  # boundary faces still have area
    with pytest.raises(ValueError):
        cell_geometry(g, 4, 0, 0)


@pytest.mark.parametrize("flat", [False, True])
def test_factors_match_cell_geometry(flat):
    """The tensor-product factor arrays equal area/distance ratios."""
    g = panel_grid(8, 4, depth=0.05, flat_mode=flat)
    f = build_factors(g)
    rng = np.random.default_rng(7)
    for _ in range(12):
        i = int(rng.integers(1, 7))
        j = int(rng.integers(1, 7))
        k = int(rng.integers(1, 3))
        c = cell_geometry(g, i, j, k)
        t_w = c.face_area_xi1[0] / c.center_dist_xi1[0]
        assert t_w == pytest.approx(f.wx[i, j] * f.dr[k], rel=1e-12)
        t_s = c.face_area_xi2[0] / c.center_dist_xi2[0]
        assert t_s == pytest.approx(f.wy[i, j] * f.dr[k], rel=1e-12)
        t_d = c.face_area_r[0] / c.center_dist_r[0]
        assert t_d == pytest.approx(f.av[i, j] * f.vprof[k], rel=1e-12)
        assert c.volume == pytest.approx(f.vh[i, j] * f.volprof[k], rel=1e-12)
