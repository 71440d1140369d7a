"""Fabricable terrain solids: exaggerate, solidify, tile, export binary STL.

A solid is built from two heightfields on the same vertex lattice: the top
surface (scaled terrain) and an underside that is 0 on a border ring, on
pillar footprints, and on tile walls, and `shell` below the top elsewhere.
That construction is watertight by design: top, underside, and the four
walls pair every edge exactly twice.

Units: input terrain in meters, output meshes in millimeters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, MeshError
from .terrain import TerrainGrid


@dataclass(frozen=True)
class FabricationConfig:
    z_scale: float = 1.5               # vertical exaggeration (domain rule of thumb)
    xy_scale: float = 0.001            # model meters per world meter
    base_thickness_mm: float = 6.0
    pillar_pitch_mm: float = 25.0
    pillar_radius_mm: float = 3.0
    shell_thickness_mm: float | None = 4.0   # None = solid body, no cavity
    tile_rows: int = 1
    tile_cols: int = 1
    envelope_mm: tuple[float, float, float] = (300.0, 300.0, 300.0)

    def __post_init__(self):
        positive = {
            "z_scale": self.z_scale, "xy_scale": self.xy_scale,
            "base_thickness_mm": self.base_thickness_mm,
            "pillar_pitch_mm": self.pillar_pitch_mm,
            "pillar_radius_mm": self.pillar_radius_mm,
            "tile_rows": self.tile_rows, "tile_cols": self.tile_cols,
        }
        for name, v in positive.items():
            if v <= 0:
                raise DomainError(f"{name} must be positive, got {v}")
        if self.shell_thickness_mm is not None and self.shell_thickness_mm <= 0:
            raise DomainError("shell_thickness_mm must be positive or None")
        if any(e <= 0 for e in self.envelope_mm):
            raise DomainError("printer envelope must be positive")


@dataclass
class SolidMesh:
    """Triangle mesh in millimeters; triangles wind counter-clockwise outward."""

    vertices: np.ndarray           # (V, 3) float64
    triangles: np.ndarray          # (T, 3) int32
    name: str = "solid"

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    def triangle_points(self) -> np.ndarray:
        return self.vertices[self.triangles]

    def signed_volume(self) -> float:
        p = self.triangle_points()
        return float(np.einsum("ti,ti->t", p[:, 0], np.cross(p[:, 1], p[:, 2])).sum() / 6.0)

    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def top_surface_area(self) -> float:
        """Area of upward-facing triangles (normal z > 0)."""
        p = self.triangle_points()
        n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        up = n[:, 2] > 1e-12
        return float(0.5 * np.linalg.norm(n[up], axis=1).sum())


def check_watertight(mesh: SolidMesh) -> None:
    """Edge-pairing, orientation, degeneracy, and volume-sign checks.

    Every undirected edge must be shared by exactly two triangles and each
    directed edge must appear exactly once (consistent outward winding).
    Raises MeshError with the first failure found.
    """
    if mesh.n_triangles == 0:
        raise MeshError(f"{mesh.name}: empty mesh")
    p = mesh.triangle_points()
    areas = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
    if np.any(areas <= 1e-12):
        raise MeshError(f"{mesh.name}: degenerate triangle (zero area) at index "
                        f"{int(np.argmin(areas))}")
    tri = mesh.triangles
    edges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
    directed = set()
    for a, b in edges:
        key = (int(a), int(b))
        if key in directed:
            raise MeshError(f"{mesh.name}: directed edge {key} repeated; inconsistent winding")
        directed.add(key)
    for a, b in directed:
        if (b, a) not in directed:
            raise MeshError(f"{mesh.name}: boundary edge {(a, b)}; mesh is not closed")
    if mesh.signed_volume() <= 0:
        raise MeshError(f"{mesh.name}: non-positive signed volume; inward orientation")


def exaggerate(grid: TerrainGrid, z_scale: float) -> TerrainGrid:
    """Multiply heights by z_scale (default fabrication uses 1.5)."""
    if z_scale <= 0:
        raise DomainError(f"z_scale must be positive, got {z_scale}")
    return grid.with_heights(grid.heights * z_scale)


class _MeshBuilder:
    def __init__(self, name: str):
        self.name = name
        self._index: dict[tuple, int] = {}
        self.vertices: list[tuple] = []
        self.triangles: list[tuple] = []

    def vertex(self, x: float, y: float, z: float) -> int:
        key = (x, y, z)
        idx = self._index.get(key)
        if idx is None:
            idx = len(self.vertices)
            self._index[key] = idx
            self.vertices.append(key)
        return idx

    def tri(self, a: int, b: int, c: int) -> None:
        if a == b or b == c or a == c:
            raise MeshError(f"{self.name}: attempted degenerate triangle")
        self.triangles.append((a, b, c))

    def quad(self, a: int, b: int, c: int, d: int) -> None:
        """Split a planar-ish quad abcd (counter-clockwise outward)."""
        self.tri(a, b, c)
        self.tri(a, c, d)

    def build(self) -> SolidMesh:
        return SolidMesh(vertices=np.array(self.vertices, dtype=np.float64),
                         triangles=np.array(self.triangles, dtype=np.int32),
                         name=self.name)


def _underside_heights(z_top: np.ndarray, xs: np.ndarray, ys: np.ndarray,
                       config: FabricationConfig, name: str) -> np.ndarray:
    """Underside lattice: 0 on ring, walls, pillars; top - shell in the cavity."""
    nr, nc = z_top.shape
    z_bot = np.zeros_like(z_top)
    shell = config.shell_thickness_mm
    if shell is None:
        return z_bot
    x0, x1 = xs[0], xs[-1]
    y0, y1 = ys[0], ys[-1]
    xx, yy = np.meshgrid(xs, ys)
    in_cavity = ((xx - x0 >= shell) & (x1 - xx >= shell)
                 & (yy - y0 >= shell) & (y1 - yy >= shell))
    if not in_cavity.any():
        return z_bot  # tile too small to hollow; stays solid
    ceiling = z_top - shell
    if ceiling[in_cavity].min() <= 0.0:
        raise MeshError(f"{name}: shell {shell} mm thicker than the minimum terrain "
                        f"height above the base plane")
    # pillar lattice, centered on the cavity, clipped by pillar radius
    pitch, rad = config.pillar_pitch_mm, config.pillar_radius_mm
    cav_x0, cav_x1 = x0 + shell, x1 - shell
    cav_y0, cav_y1 = y0 + shell, y1 - shell
    px = _pillar_centers(cav_x0 + rad, cav_x1 - rad, pitch)
    py = _pillar_centers(cav_y0 + rad, cav_y1 - rad, pitch)
    pillar = np.zeros_like(in_cavity)
    for cx in px:
        for cy in py:
            disc = (xx - cx) ** 2 + (yy - cy) ** 2 <= rad ** 2
            if not disc.any():
                # radius below lattice spacing: keep at least one column
                disc.flat[np.argmin((xx - cx) ** 2 + (yy - cy) ** 2)] = True
            pillar |= disc
    z_bot[in_cavity & ~pillar] = ceiling[in_cavity & ~pillar]
    return z_bot


def _pillar_centers(lo: float, hi: float, pitch: float) -> np.ndarray:
    """Pillar coordinates at the given pitch, centered in [lo, hi]."""
    if hi < lo:
        return np.zeros(0)
    n = int(np.floor((hi - lo) / pitch)) + 1
    span = (n - 1) * pitch
    start = lo + ((hi - lo) - span) / 2.0
    return start + pitch * np.arange(n)


def _solidify_window(grid: TerrainGrid, config: FabricationConfig,
                     r0: int, r1: int, c0: int, c1: int,
                     h_datum: float, name: str) -> SolidMesh:
    """Solid for the vertex window [r0..r1] x [c0..c1] (inclusive)."""
    s = config.xy_scale * 1000.0  # mm per world meter
    cell = grid.cell_size
    cs = np.arange(c0, c1 + 1)
    rs = np.arange(r0, r1 + 1)
    xs = (cs + 0.5) * cell * s
    ys = (rs + 0.5) * cell * s
    z_top = config.base_thickness_mm + (grid.heights[r0:r1 + 1, c0:c1 + 1] - h_datum) * config.z_scale * s
    z_bot = _underside_heights(z_top, xs, ys, config, name)

    b = _MeshBuilder(name)
    nr, nc = z_top.shape
    top = np.empty((nr, nc), dtype=np.int64)
    bot = np.empty((nr, nc), dtype=np.int64)
    for r in range(nr):
        for c in range(nc):
            top[r, c] = b.vertex(xs[c], ys[r], z_top[r, c])
            bot[r, c] = b.vertex(xs[c], ys[r], z_bot[r, c])

    # top surface, outward = +z
    for r in range(nr - 1):
        for c in range(nc - 1):
            b.quad(top[r, c], top[r, c + 1], top[r + 1, c + 1], top[r + 1, c])
    # underside, outward = -z
    for r in range(nr - 1):
        for c in range(nc - 1):
            b.quad(bot[r, c], bot[r + 1, c], bot[r + 1, c + 1], bot[r, c + 1])
    # walls: south (-y), north (+y), west (-x), east (+x)
    for c in range(nc - 1):
        b.quad(top[0, c], bot[0, c], bot[0, c + 1], top[0, c + 1])
        b.quad(top[nr - 1, c], top[nr - 1, c + 1], bot[nr - 1, c + 1], bot[nr - 1, c])
    for r in range(nr - 1):
        b.quad(top[r, 0], top[r + 1, 0], bot[r + 1, 0], bot[r, 0])
        b.quad(top[r, nc - 1], bot[r, nc - 1], bot[r + 1, nc - 1], top[r + 1, nc - 1])

    mesh = b.build()
    check_watertight(mesh)
    return mesh


def solidify(grid: TerrainGrid, config: FabricationConfig | None = None) -> SolidMesh:
    """Whole-grid watertight solid with base, walls, cavity, and pillars."""
    config = config or FabricationConfig()
    return _solidify_window(grid, config, 0, grid.n_rows - 1, 0, grid.n_cols - 1,
                            float(grid.heights.min()), name="terrain")


def tile(grid: TerrainGrid, config: FabricationConfig | None = None,
         rows: int | None = None, cols: int | None = None) -> list[SolidMesh]:
    """rows x cols solids; adjacent tiles share boundary vertices bit-exactly.

    Tile vertex coordinates come from the same global index formula, so
    assembled seams are flush. Every tile is individually watertight and
    must fit the printer envelope.
    """
    config = config or FabricationConfig()
    rows = config.tile_rows if rows is None else rows
    cols = config.tile_cols if cols is None else cols
    if rows < 1 or cols < 1:
        raise DomainError("tile rows and cols must be >= 1")
    if rows > grid.n_rows - 1 or cols > grid.n_cols - 1:
        raise DomainError(f"cannot cut {rows}x{cols} tiles from a "
                          f"{grid.n_rows}x{grid.n_cols} grid")
    h_datum = float(grid.heights.min())
    r_cuts = np.unique(np.round(np.linspace(0, grid.n_rows - 1, rows + 1)).astype(int))
    c_cuts = np.unique(np.round(np.linspace(0, grid.n_cols - 1, cols + 1)).astype(int))
    meshes = []
    for ri in range(len(r_cuts) - 1):
        for ci in range(len(c_cuts) - 1):
            name = f"tile_r{ri}_c{ci}"
            mesh = _solidify_window(grid, config, r_cuts[ri], r_cuts[ri + 1],
                                    c_cuts[ci], c_cuts[ci + 1], h_datum, name)
            lo, hi = mesh.bbox()
            size = hi - lo
            if np.any(size > np.asarray(config.envelope_mm) + 1e-9):
                raise MeshError(f"{name}: size {size} mm exceeds printer envelope "
                                f"{config.envelope_mm}")
            meshes.append(mesh)
    return meshes


# ---------------------------------------------------------------------------
# binary STL

_STL_HEADER = b"mudflow terrain solid; units mm"


def export_stl(mesh: SolidMesh, path) -> None:
    """Binary STL: 80-byte header, uint32 count, 50 bytes per triangle."""
    if mesh.n_triangles == 0:
        raise MeshError("empty mesh")
    p = mesh.triangle_points().astype(np.float32)
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    norms = np.linalg.norm(n, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    n = (n / norms).astype(np.float32)
    with open(path, "wb") as fh:
        fh.write(_STL_HEADER.ljust(80, b"\0"))
        fh.write(struct.pack("<I", mesh.n_triangles))
        record = struct.Struct("<12fH")
        for i in range(mesh.n_triangles):
            fh.write(record.pack(*n[i], *p[i, 0], *p[i, 1], *p[i, 2], 0))


def read_stl(path) -> SolidMesh:
    """Read a binary STL back into a SolidMesh (vertices deduplicated)."""
    raw = open(path, "rb").read()
    if len(raw) < 84:
        raise MeshError(f"{path}: too short for binary STL")
    (count,) = struct.unpack_from("<I", raw, 80)
    expected = 84 + 50 * count
    if len(raw) != expected:
        raise MeshError(f"{path}: size {len(raw)} != 84 + 50*{count}")
    b = _MeshBuilder(str(path))
    record = struct.Struct("<12fH")
    for i in range(count):
        values = record.unpack_from(raw, 84 + 50 * i)
        verts = [values[3:6], values[6:9], values[9:12]]
        b.tri(*(b.vertex(*v) for v in verts))
    return b.build()
