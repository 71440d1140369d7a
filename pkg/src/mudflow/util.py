"""Small geometry and hashing helpers used by several modules."""

from __future__ import annotations

import hashlib

import numpy as np


def polygon_area(vertices) -> float:
    """Unsigned area of a simple polygon given as an (n, 2) vertex array."""
    v = np.asarray(vertices, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
        raise ValueError("polygon needs at least 3 (x, y) vertices")
    x, y = v[:, 0], v[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_bounds(vertices) -> tuple[float, float, float, float]:
    v = np.asarray(vertices, dtype=np.float64)
    return float(v[:, 0].min()), float(v[:, 1].min()), float(v[:, 0].max()), float(v[:, 1].max())


def points_in_polygon(px, py, vertices) -> np.ndarray:
    """Vectorized even-odd (ray casting) point-in-polygon test.

    Points exactly on an edge may land on either side; callers that care
    should inset their polygons.
    """
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    v = np.asarray(vertices, dtype=np.float64)
    inside = np.zeros(px.shape, dtype=bool)
    n = v.shape[0]
    for i in range(n):
        x0, y0 = v[i]
        x1, y1 = v[(i + 1) % n]
        crosses = (y0 > py) != (y1 > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        inside ^= crosses & (px < xint)
    return inside


def sha256_arrays(*parts) -> str:
    """Hex digest over a fixed-order concatenation of arrays/bytes/strings."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            h.update(np.ascontiguousarray(part).tobytes())
        elif isinstance(part, bytes):
            h.update(part)
        else:
            h.update(repr(part).encode())
    return h.hexdigest()


def format_float(x: float) -> str:
    """Shortest decimal string that round-trips to the same float."""
    return repr(float(x))
