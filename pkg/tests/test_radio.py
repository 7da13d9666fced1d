import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hotspotloc.radio import (Cell, ConfigurationError, PixelGrid, bearing_from_north, bearings,
                              build_radio_map, check_radio_consistent, grid_for_cells, hex_layout,
                              path_loss, read_radio_csv, write_radio_csv)


def omni(cid, x, y):
    return Cell(cid, x, y, beamwidth_deg=math.inf)


# -- grid -----------------------------------------------------------------------

def test_pixel_center_mapping():
    g = PixelGrid((-100.0, 50.0), 8, 5, 25.0)
    assert g.center(0, 0) == (-87.5, 62.5)
    X, Y = g.centers()
    assert X.shape == (8, 5)
    i, j = g.index_of(X, Y)
    assert np.array_equal(i, np.arange(8)[:, None].repeat(5, 1))
    assert np.array_equal(j, np.arange(5)[None, :].repeat(8, 0))


@pytest.mark.parametrize("res", [0.0, -1.0])
def test_grid_rejects_bad_resolution(res):
    with pytest.raises(ConfigurationError, match="grid.resolution"):
        PixelGrid((0, 0), 4, 4, res)


def test_grid_rejects_empty():
    with pytest.raises(ConfigurationError):
        PixelGrid((0, 0), 0, 4)


# -- path loss ------------------------------------------------------------------

def test_path_loss_one_km_boresight():
    assert path_loss(1000.0, Cell(0, 0, 0), 0.0) == pytest.approx(128.1, abs=1e-12)


def test_pattern_at_beamwidth_adds_12_db():
    c = Cell(0, 0, 0, azimuth_deg=0.0, beamwidth_deg=65.0)
    # 65 degrees clockwise of north is bearing 295 in the anticlockwise convention
    assert path_loss(700.0, c, 295.0) - path_loss(700.0, c, 0.0) == pytest.approx(12.0, abs=1e-9)


def test_pattern_saturates_at_max_backoff():
    c = Cell(0, 0, 0, azimuth_deg=0.0)
    assert path_loss(500.0, c, 180.0) - path_loss(500.0, c, 0.0) == pytest.approx(30.0)


def test_min_distance_clamp():
    c = Cell(0, 0, 0)
    assert path_loss(10.0, c, 30.0) == path_loss(5.0, c, 30.0) == path_loss(0.0, c, 30.0)


@given(st.floats(0, 5000), st.floats(0, 5000), st.floats(0, 359.99))
def test_path_loss_monotone_in_distance(d1, d2, b):
    c = Cell(0, 0, 0, azimuth_deg=120.0)
    lo, hi = sorted((d1, d2))
    assert path_loss(lo, c, b) <= path_loss(hi, c, b)


def test_azimuth_is_clockwise():
    # an east-facing sector (azimuth 90) has no pattern loss toward the east (bearing 270)
    c = Cell(0, 0, 0, azimuth_deg=90.0)
    assert path_loss(800.0, c, 270.0) == pytest.approx(path_loss(800.0, Cell(1, 0, 0), 0.0))


# -- bearings -------------------------------------------------------------------

@pytest.mark.parametrize("point,expected", [((0, 10), 0.0), ((-10, 0), 90.0), ((0, -10), 180.0),
                                            ((10, 0), 270.0), ((-5, 5), 45.0)])
def test_bearing_anticlockwise_from_north(point, expected):
    assert bearing_from_north((0, 0), point) == pytest.approx(expected)


def test_bearing_degenerate_flag():
    assert bearing_from_north((3, 4), (3, 4), with_flag=True) == (0.0, True)
    b, flag = bearings(np.array([0.0, 1.0]), np.array([0.0, 0.0]))
    assert flag.tolist() == [True, False]
    assert b[0] == 0.0


@given(st.floats(-1e4, 1e4), st.floats(-1e4, 1e4))
def test_bearing_range(dx, dy):
    b = bearing_from_north((0, 0), (dx, dy))
    assert 0.0 <= b < 360.0


# -- layouts and maps -----------------------------------------------------------

def test_hex_layout_tri_sector():
    cells = hex_layout(7, 500)
    assert len(cells) == 21
    assert [c.id for c in cells] == list(range(21))
    for s in range(7):
        site = cells[3 * s: 3 * s + 3]
        assert len({c.site for c in site}) == 1
        assert [c.azimuth_deg for c in site] == [0.0, 120.0, 240.0]
    sites = {c.site for c in cells}
    assert (0.0, 0.0) in sites
    assert all(math.isclose(math.hypot(*s), 500.0) for s in sites if s != (0.0, 0.0))


def test_two_cells_bisector():
    g = PixelGrid((-200.0, -100.0), 16, 8, 25.0)
    radio = build_radio_map(g, [omni(0, -100, 0), omni(1, 100, 0)])
    X, _ = g.centers()
    assert np.array_equal(radio.best, np.where(X < 0, 0, 1))
    assert np.array_equal(radio.second_best, np.where(X < 0, 1, 0))


def test_single_site_best_is_closest_boresight():
    cells = hex_layout(1, 500)
    g = grid_for_cells(cells, 25.0, 400.0)
    radio = build_radio_map(g, cells)
    X, Y = g.centers()
    b, _ = bearings(X, Y)
    clockwise = np.mod(360.0 - b, 360.0)
    offs = np.stack([np.abs(np.mod(clockwise - c.azimuth_deg + 180.0, 360.0) - 180.0) for c in cells], -1)
    assert np.array_equal(radio.best_index, np.argmin(offs, axis=-1))


def test_fewer_than_two_cells_rejected():
    with pytest.raises(ConfigurationError):
        build_radio_map(PixelGrid((0, 0), 4, 4), [Cell(0, 0, 0)])


def test_duplicate_cell_ids_rejected():
    with pytest.raises(ConfigurationError):
        build_radio_map(PixelGrid((0, 0), 4, 4), [Cell(0, 0, 0), Cell(0, 50, 0)])


def test_ties_go_to_lowest_id():
    # two co-located omni cells are tied everywhere
    g = PixelGrid((-50.0, -50.0), 4, 4)
    radio = build_radio_map(g, [omni(7, 0, 0), omni(3, 0, 0)])
    assert np.all(radio.best == 3)
    assert np.all(radio.second_best == 7)


def test_shadowing_deterministic():
    cells = hex_layout(2, 500)
    g = grid_for_cells(cells)
    a = build_radio_map(g, cells, {"sigma_db": 8.0, "seed": 5})
    b = build_radio_map(g, cells, {"sigma_db": 8.0, "seed": 5})
    c = build_radio_map(g, cells, {"sigma_db": 8.0, "seed": 6})
    assert np.array_equal(a.rsrp, b.rsrp)
    assert not np.array_equal(a.rsrp, c.rsrp)


@pytest.fixture(scope="module")
def radio7():
    cells = hex_layout(7, 500)
    return build_radio_map(grid_for_cells(cells), cells)


def test_rsrp_ordering(radio7):
    r = radio7
    rb = r.rsrp_best
    r2 = np.take_along_axis(r.rsrp, r.second_index[..., None], 2)[..., 0]
    assert np.all(rb >= r2)
    masked = r.rsrp.copy()
    np.put_along_axis(masked, r.best_index[..., None], -np.inf, 2)
    np.put_along_axis(masked, r.second_index[..., None], -np.inf, 2)
    assert np.all(r2 >= masked.max(axis=2))
    assert np.all(r.best != r.second_best)


def test_dist_bearing_reconstruct_center(radio7):
    r = radio7
    X, Y = r.grid.centers()
    sx = np.array([c.x for c in r.cells])[r.best_index]
    sy = np.array([c.y for c in r.cells])[r.best_index]
    rad = np.radians(r.bearing)
    qx = sx - r.dist * np.sin(rad)
    qy = sy + r.dist * np.cos(rad)
    err = np.hypot(qx - X, qy - Y)
    assert err.max() <= r.grid.resolution / math.sqrt(2)
    assert np.all(r.dist >= 0) and np.all((r.bearing >= 0) & (r.bearing < 360))


def test_finer_grid_keeps_best_server():
    cells = hex_layout(3, 500)
    coarse = grid_for_cells(cells)
    res = coarse.resolution / 2
    # shift by half a fine pixel so every coarse center is also a fine center
    fine = PixelGrid((coarse.origin[0] - res / 2, coarse.origin[1] - res / 2),
                     2 * coarse.width + 1, 2 * coarse.height + 1, res)
    a = build_radio_map(coarse, cells)
    b = build_radio_map(fine, cells)
    assert np.array_equal(a.best, b.best[1::2, 1::2][: coarse.width, : coarse.height])


def test_translation_equivariance():
    cells = hex_layout(3, 500)
    g = grid_for_cells(cells)
    moved = [Cell(c.id, c.x + 1000.0, c.y - 250.0, c.azimuth_deg) for c in cells]
    a = build_radio_map(g, cells)
    b = build_radio_map(g.translated(1000.0, -250.0), moved)
    assert np.array_equal(a.best, b.best)
    assert np.allclose(a.dist, b.dist)
    assert np.allclose(a.rsrp, b.rsrp)


def test_radio_csv_round_trip(tmp_path, radio7):
    p = tmp_path / "radio.csv"
    write_radio_csv(radio7, p)
    first = p.read_text().splitlines()[0]
    assert first == "i,j,x,y,best_cell,second_best_cell,dist_m,bearing_deg,rsrp_best_dbm"
    t = read_radio_csv(p)
    assert t.grid == radio7.grid
    assert np.array_equal(t.best, radio7.best)
    assert np.array_equal(t.dist, radio7.dist)
    assert np.array_equal(t.rsrp_best, radio7.rsrp_best)
    check_radio_consistent(radio7, t)


def test_radio_consistency_detects_other_layout(tmp_path, radio7):
    p = tmp_path / "radio.csv"
    write_radio_csv(radio7, p)
    cells = [Cell(c.id, c.x, c.y, (c.azimuth_deg + 60.0) % 360) for c in radio7.cells]
    other = build_radio_map(radio7.grid, cells)
    with pytest.raises(ConfigurationError):
        check_radio_consistent(other, read_radio_csv(p))


def test_missing_radio_file(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        read_radio_csv(tmp_path / "nope.csv")


@settings(max_examples=30, deadline=None)
@given(st.floats(-300, 300), st.floats(-300, 300))
def test_best_server_is_argmax(x, y):
    cells = [omni(0, -150, 0), omni(1, 150, 0), omni(2, 0, 200)]
    g = PixelGrid((-400.0, -400.0), 32, 32)
    r = build_radio_map(g, cells)
    i, j = g.index_of(x, y)
    assert r.best_index[i, j] == int(np.argmax(r.rsrp[i, j]))
