"""Collision geometry for the solver: terrain heightfield plus oriented boxes.

Buildings are extruded footprint boxes, barriers are steerable oriented boxes
with an optional face tilt. Everything is reduced to flat arrays so the hot
kernels can consume it without Python objects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .terrain import TerrainGrid

DEFAULT_ALPHA = 2.5  # dynamic impact coefficient for rigid reinforced concrete


@dataclass(frozen=True)
class Barrier:
    """Steerable rigid barrier: an oriented box with an impact coefficient.

    yaw rotates the barrier about z; face_angle tilts the face about the
    barrier's width axis. center is the box center (z included).
    """

    id: str
    center: tuple[float, float, float]
    yaw: float = 0.0
    height: float = 5.0
    width: float = 20.0
    thickness: float = 1.0
    face_angle: float = 0.0
    alpha: float = DEFAULT_ALPHA

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0 or self.thickness <= 0:
            raise ValueError(f"barrier {self.id!r}: dimensions must be positive")
        if self.alpha <= 0:
            raise ValueError(f"barrier {self.id!r}: alpha must be positive")

    def moved(self, center, yaw: float | None = None) -> "Barrier":
        return replace(self, center=tuple(float(c) for c in center),
                       yaw=self.yaw if yaw is None else float(yaw))

    def resized(self, height=None, width=None, face_angle=None) -> "Barrier":
        return replace(
            self,
            height=self.height if height is None else float(height),
            width=self.width if width is None else float(width),
            face_angle=self.face_angle if face_angle is None else float(face_angle),
        )

    def rotation(self) -> np.ndarray:
        """World-from-local rotation; local axes are (thickness, width, height)."""
        cy, sy = math.cos(self.yaw), math.sin(self.yaw)
        cf, sf = math.cos(self.face_angle), math.sin(self.face_angle)
        rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
        ry = np.array([[cf, 0.0, sf], [0.0, 1.0, 0.0], [-sf, 0.0, cf]])
        return rz @ ry

    def half_extents(self) -> np.ndarray:
        return np.array([self.thickness / 2, self.width / 2, self.height / 2])

    @property
    def top_z(self) -> float:
        return self.center[2] + self.height / 2

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "center": [float(c) for c in self.center],
            "yaw": self.yaw,
            "height": self.height,
            "width": self.width,
            "thickness": self.thickness,
            "face_angle": self.face_angle,
            "alpha": self.alpha,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Barrier":
        return cls(
            id=str(d["id"]),
            center=tuple(float(c) for c in d["center"]),
            yaw=float(d.get("yaw", 0.0)),
            height=float(d.get("height", 5.0)),
            width=float(d.get("width", 20.0)),
            thickness=float(d.get("thickness", 1.0)),
            face_angle=float(d.get("face_angle", 0.0)),
            alpha=float(d.get("alpha", DEFAULT_ALPHA)),
        )


@dataclass(frozen=True)
class BoxCollider:
    """Axis-oriented box in a local frame; covers buildings and barriers."""

    center: np.ndarray
    rotation: np.ndarray  # world-from-local, (3, 3)
    half: np.ndarray

    @classmethod
    def from_barrier(cls, b: Barrier) -> "BoxCollider":
        return cls(center=np.asarray(b.center, dtype=np.float64),
                   rotation=b.rotation(), half=b.half_extents())

    @classmethod
    def from_footprint(cls, footprint: np.ndarray, base_z: float, height: float) -> "BoxCollider":
        """Axis-aligned extrusion of a building footprint's bounding box."""
        fp = np.asarray(footprint, dtype=np.float64)
        lo = fp.min(axis=0)
        hi = fp.max(axis=0)
        center = np.array([(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, base_z + height / 2])
        half = np.array([(hi[0] - lo[0]) / 2, (hi[1] - lo[1]) / 2, height / 2])
        return cls(center=center, rotation=np.eye(3), half=half)

    def sdf(self, points: np.ndarray) -> np.ndarray:
        p = (np.atleast_2d(points) - self.center) @ self.rotation  # into local frame
        q = np.abs(p) - self.half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return outside + inside

    def normal(self, points: np.ndarray) -> np.ndarray:
        """Outward normal; inside the box, the nearest-face normal."""
        p = (np.atleast_2d(points) - self.center) @ self.rotation
        q = np.abs(p) - self.half
        n_local = np.zeros_like(p)
        out_mask = q.max(axis=1) > 0
        qpos = np.maximum(q, 0.0)
        n_local[out_mask] = qpos[out_mask] * np.sign(p[out_mask])
        ax = np.argmax(q, axis=1)
        rows = ~out_mask
        n_local[rows, ax[rows]] = np.sign(p[rows, ax[rows]])
        # zero sign (dead center) defaults to +axis
        n_local[rows & (n_local[np.arange(len(p)), ax] == 0), :] = 0
        n_local[rows & (np.abs(n_local).sum(axis=1) == 0), 2] = 1.0
        norms = np.linalg.norm(n_local, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return (n_local / norms) @ self.rotation.T


def terrain_surface(grid: TerrainGrid, x: np.ndarray, y: np.ndarray):
    """Height and unit normal of the bilinear terrain patch at (x, y).

    The normal is the analytic normal of the interpolated surface, so it is
    consistent with `TerrainGrid.interpolate` between cell centers.
    """
    cs = grid.cell_size
    u = np.clip((np.asarray(x) - grid.origin_x) / cs - 0.5, 0.0, grid.n_cols - 1.0)
    v = np.clip((np.asarray(y) - grid.origin_y) / cs - 0.5, 0.0, grid.n_rows - 1.0)
    c0 = np.clip(np.floor(u).astype(np.intp), 0, grid.n_cols - 2)
    r0 = np.clip(np.floor(v).astype(np.intp), 0, grid.n_rows - 2)
    fu = u - c0
    fv = v - r0
    h = grid.heights
    h00, h01 = h[r0, c0], h[r0, c0 + 1]
    h10, h11 = h[r0 + 1, c0], h[r0 + 1, c0 + 1]
    height = h00 * (1 - fu) * (1 - fv) + h01 * fu * (1 - fv) + h10 * (1 - fu) * fv + h11 * fu * fv
    gx = ((h01 - h00) * (1 - fv) + (h11 - h10) * fv) / cs
    gy = ((h10 - h00) * (1 - fu) + (h11 - h01) * fu) / cs
    n = np.stack([-gx, -gy, np.ones_like(gx)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    return height, n


@dataclass
class ColliderSet:
    """Terrain plus box colliders, with packed views for the kernels.

    Every query returns a signed distance and an outward normal. The terrain
    signed distance is the vertical offset from the interpolated surface,
    which is exact at the surface itself.
    """

    terrain: TerrainGrid
    buildings: list[BoxCollider] = field(default_factory=list)
    barriers: dict[str, Barrier] = field(default_factory=dict)
    friction: float = 0.3

    _packed: tuple | None = field(default=None, repr=False)

    def set_barriers(self, barriers: dict[str, Barrier]) -> None:
        self.barriers = dict(barriers)
        self._packed = None

    def boxes(self) -> list[BoxCollider]:
        return self.buildings + [BoxCollider.from_barrier(b) for b in self.barriers.values()]

    def packed_boxes(self):
        """(centers (B,3), rotations (B,9) row-major, half extents (B,3))."""
        if self._packed is None:
            boxes = self.boxes()
            n = len(boxes)
            centers = np.zeros((n, 3))
            rots = np.zeros((n, 9))
            halves = np.zeros((n, 3))
            for i, b in enumerate(boxes):
                centers[i] = b.center
                rots[i] = b.rotation.reshape(-1)
                halves[i] = b.half
            self._packed = (centers, rots, halves)
        return self._packed

    def terrain_sdf(self, points: np.ndarray) -> np.ndarray:
        p = np.atleast_2d(points)
        h, _ = terrain_surface(self.terrain, p[:, 0], p[:, 1])
        return p[:, 2] - h

    def min_sdf(self, points: np.ndarray) -> np.ndarray:
        """Minimum signed distance over every collider, for penetration checks."""
        p = np.atleast_2d(points)
        d = self.terrain_sdf(p)
        for box in self.boxes():
            d = np.minimum(d, box.sdf(p))
        return d
