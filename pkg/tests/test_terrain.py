"""Terrain grid parsing, resampling, slopes, and bilinear queries."""

import numpy as np
import pytest

from mudflow.errors import DemParseError, DomainError
from mudflow.terrain import (TerrainGrid, ascii_grid_text, load_dem, parse_ascii_grid,
                             resample, save_dem, slope_field)


def grid_text(ncols=3, nrows=3, cellsize=10.0, rows=None, nodata=-9999):
    header = (f"ncols {ncols}\nnrows {nrows}\nxllcorner 0.0\nyllcorner 0.0\n"
              f"cellsize {cellsize}\nNODATA_value {nodata}\n")
    if rows is None:
        rows = [["7.0"] * ncols for _ in range(nrows)]
    return header + "\n".join(" ".join(r) for r in rows) + "\n"


class TestParse:
    def test_constant_grid(self):
        g = parse_ascii_grid(grid_text())
        assert g.n_cols == 3 and g.n_rows == 3
        assert np.all(g.heights == 7.0)
        assert g.cell_size == 10.0

    def test_too_small_grid_rejected(self):
        with pytest.raises(DemParseError, match="too small"):
            parse_ascii_grid(grid_text(ncols=1, rows=[["1"], ["2"], ["3"]]))

    def test_nodata_fill_single_cell(self):
        # oracle: nearest valid neighbor of the center cell is any of the 5.0s
        rows = [["5", "5", "5"], ["5", "-9999", "5"], ["5", "5", "5"]]
        g = parse_ascii_grid(grid_text(rows=rows))
        assert g.heights[1, 1] == 5.0

    def test_missing_header_key(self):
        text = "ncols 3\nnrows 3\nxllcorner 0\ncellsize 1\n" + "1 2 3\n" * 3
        with pytest.raises(DemParseError, match="yllcorner"):
            parse_ascii_grid(text)

    def test_duplicate_header_key(self):
        text = grid_text().replace("nrows 3", "nrows 3\nnrows 3")
        with pytest.raises(DemParseError, match="duplicate"):
            parse_ascii_grid(text)

    def test_row_length_mismatch_names_line(self):
        rows = [["1", "2", "3"], ["1", "2"], ["1", "2", "3"]]
        with pytest.raises(DemParseError, match="line 8"):
            parse_ascii_grid(grid_text(rows=rows))

    def test_non_numeric_cell_names_line(self):
        rows = [["1", "2", "3"], ["1", "x", "3"], ["1", "2", "3"]]
        with pytest.raises(DemParseError, match="line 8.*'x'"):
            parse_ascii_grid(grid_text(rows=rows))

    def test_row_order_north_first(self):
        rows = [["9", "9", "9"], ["5", "5", "5"], ["1", "1", "1"]]
        g = parse_ascii_grid(grid_text(rows=rows))
        # row 0 is the southernmost row
        assert g.heights[0, 0] == 1.0 and g.heights[2, 0] == 9.0

    def test_header_case_and_order_insensitive(self):
        text = ("CELLSIZE 2\nNROWS 2\nncols 2\nXLLCORNER 5\nyllcorner 6\n"
                "1 2\n3 4\n")
        g = parse_ascii_grid(text)
        assert g.cell_size == 2.0 and g.origin_x == 5.0 and g.origin_y == 6.0

    def test_round_trip_headers_exact(self, tmp_path):
        text = grid_text(cellsize=12.3456789)
        g = parse_ascii_grid(text)
        path = tmp_path / "g.asc"
        save_dem(g, path)
        g2 = load_dem(path)
        assert g2.cell_size == g.cell_size
        assert g2.origin_x == g.origin_x and g2.origin_y == g.origin_y
        assert g2.n_cols == g.n_cols and g2.n_rows == g.n_rows
        assert np.array_equal(g2.heights, g.heights)

    def test_serialize_reparse_identity(self):
        rng = np.random.default_rng(1)
        g = TerrainGrid(n_cols=5, n_rows=4, cell_size=3.5, origin_x=-2.25, origin_y=9.75,
                        heights=rng.uniform(-5, 40, size=(4, 5)))
        g2 = parse_ascii_grid(ascii_grid_text(g))
        assert np.array_equal(g2.heights, g.heights)


class TestResample:
    def test_identity_at_same_cell_size(self):
        rng = np.random.default_rng(2)
        g = TerrainGrid(n_cols=6, n_rows=5, cell_size=2.0, origin_x=0, origin_y=0,
                        heights=rng.uniform(0, 10, size=(5, 6)))
        r = resample(g, 2.0)
        assert r.n_cols == 6 and r.n_rows == 5
        np.testing.assert_allclose(r.heights, g.heights, atol=1e-9)

    def test_half_spacing_ramp_midpoints(self):
        # oracle: hand bilinear on a linear ramp; the midpoint between the
        # centers at x=1 (h=0) and x=3 (h=1) is their arithmetic mean
        ramp = np.array([[0.0, 1.0, 2.0]] * 3)
        g = TerrainGrid(n_cols=3, n_rows=3, cell_size=2.0, origin_x=0, origin_y=0, heights=ramp)
        assert g.height_at(2.0, 3.0) == pytest.approx(0.5)
        r = resample(g, 1.0)
        assert r.n_cols == 6
        # new center at x=1.5 sits a quarter of the way from h=0 to h=1
        assert r.heights[2, 1] == pytest.approx(0.25)
        # every resampled value equals a direct bilinear query at its center
        xs = (np.arange(6) + 0.5) * 1.0
        xx, yy = np.meshgrid(xs, xs)
        expected = g.interpolate(xx.ravel(), yy.ravel()).reshape(6, 6)
        np.testing.assert_allclose(r.heights, expected, atol=1e-12)

    def test_zero_target_rejected(self):
        g = parse_ascii_grid(grid_text())
        with pytest.raises(DomainError):
            resample(g, 0.0)

    def test_too_coarse_rejected(self):
        g = parse_ascii_grid(grid_text())  # 30 m extent
        with pytest.raises(DomainError):
            resample(g, 100.0)

    def test_extent_preserved_within_one_cell(self):
        g = parse_ascii_grid(grid_text(ncols=7, nrows=5, rows=[["1"] * 7] * 5))
        r = resample(g, 4.0)
        x0, y0, x1, y1 = g.extent
        rx0, ry0, rx1, ry1 = r.extent
        assert abs(rx1 - x1) <= 4.0 and abs(ry1 - y1) <= 4.0


class TestSlope:
    def test_flat_is_zero(self):
        g = parse_ascii_grid(grid_text())
        s = slope_field(g)
        assert np.all(s.theta == 0.0)
        np.testing.assert_allclose(s.normals[..., 2], 1.0)

    def test_unit_plane_gives_45_degrees(self):
        # oracle: analytic gradient of the plane h = x
        n = 5
        xs = (np.arange(n) + 0.5) * 1.0
        heights = np.tile(xs, (n, 1))
        g = TerrainGrid(n_cols=n, n_rows=n, cell_size=1.0, origin_x=0, origin_y=0, heights=heights)
        s = slope_field(g)
        np.testing.assert_allclose(s.theta, np.pi / 4, atol=1e-12)

    def test_scale_invariance(self):
        n = 5
        xs = (np.arange(n) + 0.5) * 1.0
        g1 = TerrainGrid(n_cols=n, n_rows=n, cell_size=1.0, origin_x=0, origin_y=0,
                         heights=np.tile(xs, (n, 1)))
        g2 = TerrainGrid(n_cols=n, n_rows=n, cell_size=2.0, origin_x=0, origin_y=0,
                         heights=2 * np.tile(xs, (n, 1)))
        np.testing.assert_allclose(slope_field(g1).theta, slope_field(g2).theta, atol=1e-12)

    def test_slope_of_resampled_plane_matches(self):
        n = 9
        xs = (np.arange(n) + 0.5) * 2.0
        g = TerrainGrid(n_cols=n, n_rows=n, cell_size=2.0, origin_x=0, origin_y=0,
                        heights=np.tile(0.5 * xs, (n, 1)))
        r = resample(g, 1.0)
        t_src = slope_field(g).theta
        t_res = slope_field(r).theta
        # interior cells only; boundary cells use one-sided differences and
        # the clamped half-cell margin of the resampled grid
        expected = t_src[2, 2]  # exact plane: every interior cell agrees
        assert np.all(np.abs(t_res[2:-2, 2:-2] - expected) < 1e-6)


class TestHeightAt:
    def test_cell_center_exact(self):
        rng = np.random.default_rng(3)
        h = rng.uniform(0, 10, size=(4, 4))
        g = TerrainGrid(n_cols=4, n_rows=4, cell_size=2.0, origin_x=1.0, origin_y=2.0, heights=h)
        assert g.height_at(1.0 + 2.0 * 1.5, 2.0 + 2.0 * 2.5) == h[2, 1]

    def test_midpoint_is_mean(self):
        heights = np.array([[0.0, 2.0], [0.0, 2.0]])
        g = TerrainGrid(n_cols=2, n_rows=2, cell_size=1.0, origin_x=0, origin_y=0, heights=heights)
        assert g.height_at(1.0, 1.0) == pytest.approx(1.0)

    def test_outside_extent_rejected(self):
        g = parse_ascii_grid(grid_text())
        with pytest.raises(DomainError):
            g.height_at(31.0, 5.0)
        with pytest.raises(DomainError):
            g.height_at(-0.1, 5.0)

    def test_continuity(self):
        rng = np.random.default_rng(4)
        g = TerrainGrid(n_cols=10, n_rows=10, cell_size=1.0, origin_x=0, origin_y=0,
                        heights=rng.uniform(0, 5, size=(10, 10)))
        pts = rng.uniform(0.5, 9.5, size=(200, 2))
        a = g.height_at(pts[:, 0], pts[:, 1])
        b = g.height_at(pts[:, 0] + 1e-6, pts[:, 1] + 1e-6)
        assert np.max(np.abs(a - b)) < 1e-3

    def test_immutability(self):
        g = parse_ascii_grid(grid_text())
        with pytest.raises(ValueError):
            g.heights[0, 0] = 1.0
