"""Terrain heightfields: ESRI ASCII grid ingestion, resampling, slope fields.

A :class:`TerrainGrid` stores cell-centered heights on a regular grid with a
lower-left origin. Row 0 is the southernmost row; ESRI ASCII files list the
northernmost row first, so parsing and writing flip row order.

Grids are immutable after construction (the height array is marked
read-only), so they can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DemParseError, DomainError
from .util import format_float

_REQUIRED_HEADER = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize")
_DEFAULT_NODATA = -9999.0


@dataclass(frozen=True)
class TerrainGrid:
    """Georeferenced heightfield with square cells.

    heights[row, col] is the height at the center of the cell whose
    lower-left corner is (origin_x + col*cell_size, origin_y + row*cell_size).
    """

    n_cols: int
    n_rows: int
    cell_size: float
    origin_x: float
    origin_y: float
    heights: np.ndarray = field(repr=False)
    nodata: float = _DEFAULT_NODATA

    def __post_init__(self):
        if self.n_cols < 2 or self.n_rows < 2:
            raise DemParseError("grid too small: need at least 2x2 cells")
        if self.cell_size <= 0:
            raise DomainError(f"cell_size must be positive, got {self.cell_size}")
        h = np.asarray(self.heights, dtype=np.float64).reshape(self.n_rows, self.n_cols)
        h.flags.writeable = False
        object.__setattr__(self, "heights", h)

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max) covering the full cell rectangle."""
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + self.n_cols * self.cell_size,
            self.origin_y + self.n_rows * self.cell_size,
        )

    def cell_center_coords(self) -> tuple[np.ndarray, np.ndarray]:
        cs = self.cell_size
        xs = self.origin_x + (np.arange(self.n_cols) + 0.5) * cs
        ys = self.origin_y + (np.arange(self.n_rows) + 0.5) * cs
        return xs, ys

    def with_heights(self, heights: np.ndarray) -> "TerrainGrid":
        return TerrainGrid(
            n_cols=self.n_cols,
            n_rows=self.n_rows,
            cell_size=self.cell_size,
            origin_x=self.origin_x,
            origin_y=self.origin_y,
            heights=heights,
            nodata=self.nodata,
        )

    def contains(self, x, y) -> np.ndarray:
        x0, y0, x1, y1 = self.extent
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return (x >= x0) & (x <= x1) & (y >= y0) & (y <= y1)

    def height_at(self, x, y):
        """Bilinear height at world coordinates, scalar or arrays.

        Raises DomainError for queries outside the grid extent. Between the
        outermost cell centers and the grid edge the interpolation clamps to
        the boundary cells (constant extrapolation over that half-cell strip).
        """
        scalar = np.isscalar(x) and np.isscalar(y)
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if not np.all(self.contains(x, y)):
            raise DomainError("height query outside grid extent")
        out = self.interpolate(x, y)
        return float(out[0]) if scalar else out

    def interpolate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Bilinear interpolation with edge clamping, no extent check."""
        cs = self.cell_size
        u = (x - self.origin_x) / cs - 0.5
        v = (y - self.origin_y) / cs - 0.5
        u = np.clip(u, 0.0, self.n_cols - 1.0)
        v = np.clip(v, 0.0, self.n_rows - 1.0)
        c0 = np.clip(np.floor(u).astype(np.intp), 0, self.n_cols - 2)
        r0 = np.clip(np.floor(v).astype(np.intp), 0, self.n_rows - 2)
        fu = u - c0
        fv = v - r0
        h = self.heights
        h00 = h[r0, c0]
        h01 = h[r0, c0 + 1]
        h10 = h[r0 + 1, c0]
        h11 = h[r0 + 1, c0 + 1]
        return (
            h00 * (1 - fu) * (1 - fv)
            + h01 * fu * (1 - fv)
            + h10 * (1 - fu) * fv
            + h11 * fu * fv
        )

    def cell_index(self, x, y) -> tuple[np.ndarray, np.ndarray]:
        """(row, col) of the cell containing each point; no bounds check."""
        c = np.clip(((np.asarray(x) - self.origin_x) // self.cell_size).astype(np.intp), 0, self.n_cols - 1)
        r = np.clip(((np.asarray(y) - self.origin_y) // self.cell_size).astype(np.intp), 0, self.n_rows - 1)
        return r, c


@dataclass(frozen=True)
class SlopeField:
    """Per-cell slope angle (radians) and unit surface normal."""

    theta: np.ndarray
    normals: np.ndarray  # (n_rows, n_cols, 3), z component positive

    def __post_init__(self):
        self.theta.flags.writeable = False
        self.normals.flags.writeable = False


def _parse_header_value(key: str, token: str, line_no: int):
    try:
        if key in ("ncols", "nrows"):
            value = int(token)
        else:
            value = float(token)
    except ValueError:
        raise DemParseError(f"line {line_no}: non-numeric value {token!r} for header key {key!r}") from None
    return value


def parse_ascii_grid(text: str, source: str = "<string>") -> TerrainGrid:
    """Parse ESRI ASCII grid text into a TerrainGrid, filling nodata cells."""
    lines = text.splitlines()
    header: dict[str, float] = {}
    data_start = None
    for idx, line in enumerate(lines):
        stripped = line.strip()
        if not stripped:
            continue
        tokens = stripped.split()
        if tokens[0][0].isalpha():
            key = tokens[0].lower()
            if key not in _REQUIRED_HEADER and key != "nodata_value":
                raise DemParseError(f"{source}: line {idx + 1}: unknown header key {tokens[0]!r}")
            if key in header:
                raise DemParseError(f"{source}: line {idx + 1}: duplicate header key {tokens[0]!r}")
            if len(tokens) != 2:
                raise DemParseError(f"{source}: line {idx + 1}: header key {tokens[0]!r} needs exactly one value")
            header[key] = _parse_header_value(key, tokens[1], idx + 1)
        else:
            data_start = idx
            break
    missing = [k for k in _REQUIRED_HEADER if k not in header]
    if missing:
        raise DemParseError(f"{source}: missing header key(s): {', '.join(missing)}")
    n_cols = int(header["ncols"])
    n_rows = int(header["nrows"])
    if n_cols < 2 or n_rows < 2:
        raise DemParseError(f"{source}: grid too small ({n_cols}x{n_rows}); need at least 2x2")
    if header["cellsize"] <= 0:
        raise DemParseError(f"{source}: cellsize must be positive")
    nodata = float(header.get("nodata_value", _DEFAULT_NODATA))

    if data_start is None:
        raise DemParseError(f"{source}: no data rows found")
    rows = []
    row_lines = [
        (i, ln.strip()) for i, ln in enumerate(lines[data_start:], start=data_start) if ln.strip()
    ]
    if len(row_lines) != n_rows:
        raise DemParseError(f"{source}: expected {n_rows} data rows, found {len(row_lines)}")
    for line_idx, stripped in row_lines:
        tokens = stripped.split()
        if len(tokens) != n_cols:
            raise DemParseError(
                f"{source}: line {line_idx + 1}: expected {n_cols} values, found {len(tokens)}"
            )
        try:
            rows.append([float(t) for t in tokens])
        except ValueError:
            bad = next(t for t in tokens if not _is_float(t))
            raise DemParseError(f"{source}: line {line_idx + 1}: non-numeric cell value {bad!r}") from None

    # File lists north first; flip so row 0 is the southernmost row.
    heights = np.array(rows[::-1], dtype=np.float64)
    heights = _fill_nodata(heights, nodata, source)
    return TerrainGrid(
        n_cols=n_cols,
        n_rows=n_rows,
        cell_size=float(header["cellsize"]),
        origin_x=float(header["xllcorner"]),
        origin_y=float(header["yllcorner"]),
        heights=heights,
        nodata=nodata,
    )


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def _fill_nodata(heights: np.ndarray, nodata: float, source: str) -> np.ndarray:
    """Replace nodata cells with the value of the nearest valid cell."""
    mask = (heights == nodata) | ~np.isfinite(heights)
    if not mask.any():
        return heights
    if mask.all():
        raise DemParseError(f"{source}: every cell is nodata")
    _, (ri, ci) = ndimage.distance_transform_edt(mask, return_indices=True)
    return heights[ri, ci]


def load_dem(path) -> TerrainGrid:
    """Load an ESRI ASCII grid file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_ascii_grid(fh.read(), source=str(path))


def ascii_grid_text(grid: TerrainGrid, nodata: float | None = None) -> str:
    """Serialize back to ESRI ASCII; header values round-trip exactly."""
    nodata = grid.nodata if nodata is None else nodata
    out = [
        f"ncols {grid.n_cols}",
        f"nrows {grid.n_rows}",
        f"xllcorner {format_float(grid.origin_x)}",
        f"yllcorner {format_float(grid.origin_y)}",
        f"cellsize {format_float(grid.cell_size)}",
        f"NODATA_value {format_float(nodata)}",
    ]
    for row in grid.heights[::-1]:
        out.append(" ".join(format_float(v) for v in row))
    return "\n".join(out) + "\n"


def save_dem(grid: TerrainGrid, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(ascii_grid_text(grid))


def resample(grid: TerrainGrid, target_cell_size: float) -> TerrainGrid:
    """Bilinear resampling onto a grid of the given cell size.

    Extents are preserved to within one target cell, and resampling to the
    current cell size reproduces the input heights exactly.
    """
    if target_cell_size <= 0:
        raise DomainError(f"target_cell_size must be positive, got {target_cell_size}")
    width = grid.n_cols * grid.cell_size
    height = grid.n_rows * grid.cell_size
    new_cols = int(round(width / target_cell_size))
    new_rows = int(round(height / target_cell_size))
    if new_cols < 2 or new_rows < 2:
        raise DomainError(
            f"target cell size {target_cell_size} too coarse for extent {width}x{height}"
        )
    xs = grid.origin_x + (np.arange(new_cols) + 0.5) * target_cell_size
    ys = grid.origin_y + (np.arange(new_rows) + 0.5) * target_cell_size
    xx, yy = np.meshgrid(xs, ys)
    heights = grid.interpolate(xx.ravel(), yy.ravel()).reshape(new_rows, new_cols)
    return TerrainGrid(
        n_cols=new_cols,
        n_rows=new_rows,
        cell_size=float(target_cell_size),
        origin_x=grid.origin_x,
        origin_y=grid.origin_y,
        heights=heights,
        nodata=grid.nodata,
    )


def slope_field(grid: TerrainGrid) -> SlopeField:
    """Slope angles and unit normals from central differences.

    Boundary cells use one-sided differences (numpy.gradient behavior).
    Flat cells yield theta = 0 and the up normal.
    """
    gy, gx = np.gradient(grid.heights, grid.cell_size)
    theta = np.arctan(np.hypot(gx, gy))
    normals = np.empty((grid.n_rows, grid.n_cols, 3), dtype=np.float64)
    normals[..., 0] = -gx
    normals[..., 1] = -gy
    normals[..., 2] = 1.0
    normals /= np.linalg.norm(normals, axis=-1, keepdims=True)
    return SlopeField(theta=theta, normals=normals)


def height_at(grid: TerrainGrid, x, y):
    """Functional alias for TerrainGrid.height_at."""
    return grid.height_at(x, y)
