"""Fabrication path: exaggeration, watertight solids, tiling, binary STL."""

import struct

import numpy as np
import pytest

from mudflow import fixtures
from mudflow.errors import DomainError, MeshError
from mudflow.physicalize import (FabricationConfig, SolidMesh, check_watertight,
                                 exaggerate, export_stl, read_stl, solidify, tile)
from mudflow.terrain import TerrainGrid


def flat_grid(n=2, cell=1.0, height=10.0):
    return TerrainGrid(n_cols=n, n_rows=n, cell_size=cell, origin_x=0, origin_y=0,
                       heights=np.full((n, n), float(height)))


def solid_config(**kw):
    defaults = dict(xy_scale=0.01, shell_thickness_mm=None)
    defaults.update(kw)
    return FabricationConfig(**defaults)


class TestExaggerate:
    def test_identity(self):
        g = fixtures.make_island()
        np.testing.assert_array_equal(exaggerate(g, 1.0).heights, g.heights)

    def test_default_scale_is_1_5(self):
        assert FabricationConfig().z_scale == 1.5

    def test_multiplies_heights(self):
        g = flat_grid(height=10.0)
        assert np.all(exaggerate(g, 1.5).heights == 15.0)

    def test_relief_ratio_scales_exactly(self):
        g = fixtures.make_v_channel()
        e = exaggerate(g, 1.5)
        relief = g.heights.max() - g.heights.min()
        assert e.heights.max() - e.heights.min() == pytest.approx(1.5 * relief, rel=1e-12)

    def test_non_positive_scale_rejected(self):
        with pytest.raises(DomainError):
            exaggerate(flat_grid(), 0.0)


class TestSolidify:
    def test_flat_box_volume(self):
        # oracle: box volume formula; a 2x2 flat grid with no cavity is a box
        g = flat_grid(n=2, cell=1.0, height=10.0)
        cfg = solid_config()
        mesh = solidify(g, cfg)
        assert mesh.n_triangles == 12
        w = 1.0 * cfg.xy_scale * 1000.0          # one cell in mm
        h = cfg.base_thickness_mm                # flat terrain: relief 0
        assert mesh.signed_volume() == pytest.approx(w * w * h, rel=1e-9)

    def test_every_solid_watertight(self):
        for grid in (fixtures.make_island(), fixtures.make_v_channel()):
            mesh = solidify(grid, FabricationConfig(xy_scale=0.002))
            check_watertight(mesh)  # raises on failure

    def test_oversized_pillar_pitch_no_pillars(self):
        g = fixtures.make_island(n_cols=12, n_rows=10)
        cfg = FabricationConfig(xy_scale=0.002, pillar_pitch_mm=1e6)
        mesh = solidify(g, cfg)
        check_watertight(mesh)
        # a huge pitch still leaves the single centered column
        cfg_solid = FabricationConfig(xy_scale=0.002, shell_thickness_mm=None)
        assert mesh.signed_volume() < solidify(g, cfg_solid).signed_volume()

    def test_hollow_less_than_solid_pillars_add_volume(self):
        # pillar pitch must exceed the 50 mm vertex lattice to resolve columns
        g = fixtures.make_island(n_cols=16, n_rows=12)
        solid = solidify(g, FabricationConfig(xy_scale=0.005, shell_thickness_mm=None,
                                              envelope_mm=(900, 900, 900)))
        hollow_few = solidify(g, FabricationConfig(xy_scale=0.005, pillar_pitch_mm=1e6,
                                                   envelope_mm=(900, 900, 900)))
        hollow_many = solidify(g, FabricationConfig(xy_scale=0.005, pillar_pitch_mm=55.0,
                                                    envelope_mm=(900, 900, 900)))
        assert hollow_few.signed_volume() < hollow_many.signed_volume() < solid.signed_volume()

    def test_shell_thicker_than_relief_rejected(self):
        g = flat_grid(n=4, cell=10.0, height=0.0)
        cfg = FabricationConfig(xy_scale=0.01, base_thickness_mm=3.0, shell_thickness_mm=5.0)
        with pytest.raises(MeshError, match="shell"):
            solidify(g, cfg)

    def test_z_exaggeration_in_mesh_heights(self):
        # ramp fixture: relief in the mesh is exactly z_scale * world relief
        n = 6
        xs = (np.arange(n) + 0.5) * 10.0
        g = TerrainGrid(n_cols=n, n_rows=n, cell_size=10.0, origin_x=0, origin_y=0,
                        heights=np.tile(xs, (n, 1)))
        cfg = solid_config(z_scale=1.5, xy_scale=0.01)
        mesh = solidify(g, cfg)
        z = mesh.vertices[:, 2]
        relief_mm = z.max() - cfg.base_thickness_mm
        world_relief = g.heights.max() - g.heights.min()
        assert relief_mm == pytest.approx(1.5 * world_relief * 0.01 * 1000.0, rel=1e-12)


class TestTile:
    def test_single_tile_equals_solidify(self):
        g = fixtures.make_island(n_cols=10, n_rows=8)
        cfg = FabricationConfig(xy_scale=0.002)
        one = tile(g, cfg, 1, 1)
        assert len(one) == 1
        whole = solidify(g, cfg)
        assert one[0].n_triangles == whole.n_triangles
        assert one[0].signed_volume() == pytest.approx(whole.signed_volume(), rel=1e-12)

    def test_two_by_two_yields_four_parts(self):
        g = fixtures.make_island(n_cols=12, n_rows=12, peak=60.0)
        parts = tile(g, FabricationConfig(xy_scale=0.002), 2, 2)
        assert len(parts) == 4
        for p in parts:
            check_watertight(p)

    def test_4x3_tiling_covers_quads_once(self):
        # oracle: triangle-count bookkeeping, 2 triangles per cell quad
        g = fixtures.make_island(n_cols=40, n_rows=30, cell=10.0)
        parts = tile(g, FabricationConfig(xy_scale=0.001, shell_thickness_mm=None), 4, 3)
        assert len(parts) == 12
        top_triangles = sum(
            int((np.cross(p.triangle_points()[:, 1] - p.triangle_points()[:, 0],
                          p.triangle_points()[:, 2] - p.triangle_points()[:, 0])[:, 2] > 1e-12).sum())
            for p in parts)
        assert top_triangles == 2 * 39 * 29

    def test_shared_boundary_vertices_bit_equal(self):
        g = fixtures.make_island(n_cols=14, n_rows=10, peak=60.0)
        cfg = FabricationConfig(xy_scale=0.002)
        left, right = tile(g, cfg, 1, 2)
        lv = {tuple(v) for v in left.vertices}
        shared = [tuple(v) for v in right.vertices if tuple(v) in lv]
        # the cut column shares its full top edge, byte for byte
        assert len(shared) >= 10

    def test_tiling_conserves_top_area(self):
        g = fixtures.make_v_channel(n_cols=32, n_rows=21)
        cfg = FabricationConfig(xy_scale=0.002)
        whole = solidify(g, cfg).top_surface_area()
        parts = tile(g, cfg, 2, 2)
        total = sum(p.top_surface_area() for p in parts)
        assert total == pytest.approx(whole, rel=1e-6)

    def test_envelope_enforced(self):
        g = fixtures.make_island()
        cfg = FabricationConfig(xy_scale=0.01, envelope_mm=(50.0, 50.0, 50.0))
        with pytest.raises(MeshError, match="envelope"):
            tile(g, cfg, 1, 1)


class TestStl:
    def test_single_triangle_file_size(self, tmp_path):
        mesh = SolidMesh(vertices=np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]),
                         triangles=np.array([[0, 1, 2]], dtype=np.int32))
        path = tmp_path / "one.stl"
        export_stl(mesh, path)
        assert path.stat().st_size == 134  # 84 + 50

    def test_box_round_trip(self, tmp_path):
        g = flat_grid(n=2, cell=1.0, height=4.0)
        mesh = solidify(g, solid_config())
        path = tmp_path / "box.stl"
        export_stl(mesh, path)
        assert path.stat().st_size == 84 + 50 * 12
        back = read_stl(path)
        assert back.n_triangles == 12
        orig = np.sort(np.unique(mesh.triangle_points().reshape(-1, 3), axis=0), axis=0)
        rt = np.sort(np.unique(back.triangle_points().reshape(-1, 3), axis=0), axis=0)
        np.testing.assert_allclose(rt, orig, atol=1e-5)  # float32 rounding

    def test_size_formula_exact_for_tiles(self, tmp_path):
        g = fixtures.make_island(n_cols=10, n_rows=8)
        for i, mesh in enumerate(tile(g, FabricationConfig(xy_scale=0.002), 2, 2)):
            path = tmp_path / f"t{i}.stl"
            export_stl(mesh, path)
            assert path.stat().st_size == 84 + 50 * mesh.n_triangles

    def test_empty_mesh_rejected(self, tmp_path):
        mesh = SolidMesh(vertices=np.zeros((0, 3)), triangles=np.zeros((0, 3), dtype=np.int32))
        with pytest.raises(MeshError, match="empty mesh"):
            export_stl(mesh, tmp_path / "empty.stl")

    def test_triangle_count_header(self, tmp_path):
        g = flat_grid(n=3, cell=2.0, height=1.0)
        mesh = solidify(g, solid_config())
        path = tmp_path / "c.stl"
        export_stl(mesh, path)
        raw = path.read_bytes()
        (count,) = struct.unpack_from("<I", raw, 80)
        assert count == mesh.n_triangles


class TestWatertightChecker:
    def test_detects_open_mesh(self):
        mesh = SolidMesh(vertices=np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]),
                         triangles=np.array([[0, 1, 2]], dtype=np.int32))
        with pytest.raises(MeshError, match="boundary edge|not closed"):
            check_watertight(mesh)

    def test_detects_degenerate(self):
        mesh = SolidMesh(vertices=np.array([[0.0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]]),
                         triangles=np.array([[0, 1, 2], [0, 2, 1], [0, 1, 3], [0, 3, 1]],
                                            dtype=np.int32))
        with pytest.raises(MeshError, match="degenerate"):
            check_watertight(mesh)

    def test_detects_inverted_orientation(self):
        g = flat_grid(n=2, cell=1.0, height=3.0)
        mesh = solidify(g, solid_config())
        flipped = SolidMesh(vertices=mesh.vertices, triangles=mesh.triangles[:, ::-1].copy())
        with pytest.raises(MeshError, match="volume|winding"):
            check_watertight(flipped)
