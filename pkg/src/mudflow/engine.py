"""Real-time debris-flow solver.

Hybrid particle/grid (MLS-MPM) weakly compressible fluid, two-way coupled
with discrete spherical boulders, colliding with terrain, buildings, and
barriers. The per-step transfer kernels live in a compiled extension with a
NumPy fallback; everything here orchestrates them and owns the state.

Determinism contract: identical seed, parameters, and command schedule give
bit-identical states. All reductions run in a fixed order on every backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import backends
from ._kernels_np import sample_grid, scatter_impulse
from .colliders import Barrier, BoxCollider, ColliderSet, terrain_surface
from .errors import CflError, DivergenceError, DomainError, UnknownBarrierError
from .terrain import TerrainGrid
from .util import points_in_polygon, polygon_area, polygon_bounds, sha256_arrays


@dataclass(frozen=True)
class SimParams:
    """Solver and analysis parameters; scenario files can override any field."""

    dt: float = 0.004
    gravity: float = 9.81
    rho: float = 2000.0            # flow density, kg/m^3
    eos_stiffness: float = 7.0e5   # Tait pressure scale, Pa
    eos_gamma: float = 7.0
    drag: float = 3.0              # boulder-fluid drag rate, 1/s
    mu_t: float = 0.3              # tangential Coulomb friction at colliders
    cfl_factor: float = 0.4
    particles_per_cell: int = 8
    boulder_density: float = 2650.0
    walls: bool = True
    reorder_interval: int = 16     # steps between cache-locality resorts; 0 disables
    # analysis-side parameters carried with the scenario
    alpha: float = 2.5             # barrier impact coefficient default
    landing_R: float = 0.8         # landing velocity reduction factor
    h_min: float = 0.05            # footprint depth threshold, m
    w_b: float = 0.5
    w_p: float = 0.5

    def replace(self, **kw) -> "SimParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class GridSpec:
    """Background MPM grid: nodes at origin + index * dx."""

    origin: tuple[float, float, float]
    nx: int
    ny: int
    nz: int
    dx: float

    @classmethod
    def from_terrain(cls, grid: TerrainGrid, dx: float | None = None,
                     headroom: float = 20.0) -> "GridSpec":
        dx = grid.cell_size if dx is None else float(dx)
        width = grid.n_cols * grid.cell_size
        depth = grid.n_rows * grid.cell_size
        h_min = float(grid.heights.min())
        h_max = float(grid.heights.max())
        nx = int(round(width / dx)) + 1
        ny = int(round(depth / dx)) + 1
        z0 = h_min - 2 * dx
        nz = int(math.ceil((h_max + headroom - z0) / dx)) + 1
        return cls(origin=(grid.origin_x, grid.origin_y, z0), nx=nx, ny=ny, nz=nz, dx=dx)

    @property
    def dims(self) -> tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    def node_xy(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.origin[0] + np.arange(self.nx) * self.dx
        ys = self.origin[1] + np.arange(self.ny) * self.dx
        return xs, ys

    def domain_bounds(self, margin_nodes: int = 2):
        lo = np.array(self.origin) + margin_nodes * self.dx
        hi = np.array(self.origin) + (np.array(self.dims) - 1 - margin_nodes) * self.dx
        return lo, hi


@dataclass
class BoulderSet:
    pos: np.ndarray
    vel: np.ndarray
    radius: np.ndarray
    mass: np.ndarray

    @classmethod
    def empty(cls) -> "BoulderSet":
        return cls(pos=np.zeros((0, 3)), vel=np.zeros((0, 3)),
                   radius=np.zeros(0), mass=np.zeros(0))

    def __len__(self) -> int:
        return len(self.radius)


@dataclass
class BarrierContactLog:
    """Running record of flow interaction with one barrier face."""

    barrier_id: str
    max_approach_speed: float = 0.0
    max_depth: float = 0.0
    max_width: float = 0.0
    overtopped_volume: float = 0.0
    flow_rates: list = field(default_factory=list)  # (t, m^3/s)

    @property
    def peak_flow_rate(self) -> float:
        return max((r for _, r in self.flow_rates), default=0.0)

    def as_dict(self) -> dict:
        return {
            "barrier_id": self.barrier_id,
            "max_approach_speed": self.max_approach_speed,
            "max_depth": self.max_depth,
            "max_width": self.max_width,
            "overtopped_volume": self.overtopped_volume,
            "peak_flow_rate": self.peak_flow_rate,
        }


class DebrisFlowSim:
    """Owns the full simulation state and advances it one dt at a time.

    `step` requires exclusive access; emitted rasters and hashes are plain
    values that may be handed to other threads.
    """

    def __init__(self, terrain: TerrainGrid, params: SimParams | None = None,
                 buildings: list[BoxCollider] | None = None,
                 dx: float | None = None, headroom: float = 20.0,
                 grid_dims: tuple[int, int, int] | None = None,
                 backend: str = "auto", seed: int = 0):
        self.terrain = terrain
        self.params = params or SimParams()
        self.kernels = backends.get_backend(backend)
        self.seed = int(seed)
        self.grid = GridSpec.from_terrain(terrain, dx=dx, headroom=headroom)
        if grid_dims is not None:
            self.grid = replace(self.grid, nx=grid_dims[0], ny=grid_dims[1], nz=grid_dims[2])
        self.colliders = ColliderSet(terrain=terrain, buildings=list(buildings or ()),
                                     friction=self.params.mu_t)

        n = 0
        self.pos = np.zeros((n, 3))
        self.vel = np.zeros((n, 3))
        self.C = np.zeros((n, 3, 3))
        self.J = np.ones(n)
        self.vol0 = np.zeros(n)
        self.mass = np.zeros(n)
        self.boulders = BoulderSet.empty()
        self.time = 0.0
        self.step_index = 0
        self.contact_logs: dict[str, BarrierContactLog] = {}
        self._pos_prev: np.ndarray | None = None

        self.grid_mp = np.zeros(self.grid.dims + (4,))  # [mass, px, py, pz] per node
        self._node_h, self._node_n = self._precompute_node_columns()
        self._origin_arr = np.asarray(self.grid.origin)
        self._domain_lo, self._domain_hi = self.grid.domain_bounds()

    # ------------------------------------------------------------------
    # setup

    def _precompute_node_columns(self):
        xs, ys = self.grid.node_xy()
        xx, yy = np.meshgrid(xs, ys, indexing="ij")
        h, n = terrain_surface(self.terrain, xx.ravel(), yy.ravel())
        return (h.reshape(self.grid.nx, self.grid.ny),
                np.ascontiguousarray(n.reshape(self.grid.nx, self.grid.ny, 3)))

    @property
    def penetration_tol(self) -> float:
        return 0.05 * self.grid.dx

    @property
    def particle_count(self) -> int:
        return len(self.pos)

    def seed_release(self, polygon, volume: float, particles_per_cell: int | None = None,
                     initial_velocity=(0.0, 0.0, 0.0)) -> int:
        """Seed fluid particles uniformly above the terrain inside a polygon.

        The summed particle volume equals the requested volume exactly.
        Returns the number of particles added. Deterministic for a fixed
        seed: identical calls produce byte-identical particle sets.
        """
        if volume <= 0:
            raise DomainError(f"release volume must be positive, got {volume}")
        area = polygon_area(polygon)
        if area <= 0:
            raise DomainError("release region has zero area")
        x0, y0, x1, y1 = polygon_bounds(polygon)
        ex0, ey0, ex1, ey1 = self.terrain.extent
        if x0 < ex0 or y0 < ey0 or x1 > ex1 or y1 > ey1:
            raise DomainError("release region outside terrain extent")

        ppc = particles_per_cell or self.params.particles_per_cell
        target_vol = self.grid.dx ** 3 / ppc
        n = max(1, int(round(volume / target_vol)))
        per_particle = volume / n
        depth = volume / area

        rng = np.random.default_rng(self.seed)
        pts = np.zeros((0, 2))
        while len(pts) < n:
            cand = rng.uniform((x0, y0), (x1, y1), size=(max(64, 2 * n), 2))
            keep = points_in_polygon(cand[:, 0], cand[:, 1], polygon)
            pts = np.concatenate([pts, cand[keep]])
        pts = pts[:n]
        base = self.terrain.height_at(pts[:, 0], pts[:, 1])
        z = base + rng.uniform(0.0, 1.0, size=n) * depth + 0.01 * self.grid.dx

        pos = np.column_stack([pts, z])
        vel = np.tile(np.asarray(initial_velocity, dtype=np.float64), (n, 1))
        self.add_particles(pos, vel=vel, particle_volume=per_particle)
        return n

    def add_particles(self, pos, vel=None, particle_volume: float | None = None) -> None:
        """Append particles directly (used by tests and scripted fixtures)."""
        pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
        n = len(pos)
        if vel is None:
            vel = np.zeros((n, 3))
        vel = np.atleast_2d(np.asarray(vel, dtype=np.float64))
        pv = particle_volume if particle_volume is not None else self.grid.dx ** 3 / self.params.particles_per_cell
        self.pos = np.ascontiguousarray(np.concatenate([self.pos, pos]))
        self.vel = np.ascontiguousarray(np.concatenate([self.vel, vel]))
        self.C = np.ascontiguousarray(np.concatenate([self.C, np.zeros((n, 3, 3))]))
        self.J = np.concatenate([self.J, np.ones(n)])
        self.vol0 = np.concatenate([self.vol0, np.full(n, pv)])
        self.mass = np.concatenate([self.mass, np.full(n, pv * self.params.rho)])
        self._clamp_positions()

    def add_boulders(self, count: int, radius, polygon, density: float | None = None) -> None:
        """Seed rigid spherical boulders resting on the terrain in a region."""
        if count <= 0:
            return
        rho_b = density or self.params.boulder_density
        rng = np.random.default_rng(self.seed + 1)
        x0, y0, x1, y1 = polygon_bounds(polygon)
        pts = np.zeros((0, 2))
        while len(pts) < count:
            cand = rng.uniform((x0, y0), (x1, y1), size=(max(16, 4 * count), 2))
            keep = points_in_polygon(cand[:, 0], cand[:, 1], polygon)
            pts = np.concatenate([pts, cand[keep]])
        pts = pts[:count]
        if np.isscalar(radius):
            radii = np.full(count, float(radius))
        else:
            radii = rng.uniform(radius[0], radius[1], size=count)
        z = self.terrain.height_at(pts[:, 0], pts[:, 1]) + radii
        mass = rho_b * (4.0 / 3.0) * np.pi * radii ** 3
        self.boulders = BoulderSet(
            pos=np.concatenate([self.boulders.pos, np.column_stack([pts, z])]),
            vel=np.concatenate([self.boulders.vel, np.zeros((count, 3))]),
            radius=np.concatenate([self.boulders.radius, radii]),
            mass=np.concatenate([self.boulders.mass, mass]),
        )

    def set_barriers(self, barriers: dict[str, Barrier]) -> None:
        self.colliders.set_barriers(barriers)
        for bid in barriers:
            self.contact_logs.setdefault(bid, BarrierContactLog(barrier_id=bid))

    def contact_log(self, barrier_id: str) -> BarrierContactLog:
        if barrier_id not in self.contact_logs:
            raise UnknownBarrierError(barrier_id)
        return self.contact_logs[barrier_id]

    def _clamp_positions(self) -> None:
        np.clip(self.pos, self._domain_lo, self._domain_hi, out=self.pos)

    # ------------------------------------------------------------------
    # stepping

    def step(self) -> None:
        """Advance the state by one dt: transfer, grid update, gather, contacts."""
        p = self.params
        dt = p.dt
        dx = self.grid.dx
        vmax = self.kernels.max_speed(self.vel)
        if len(self.boulders):
            vmax = max(vmax, self.kernels.max_speed(self.boulders.vel))
        if vmax * dt > p.cfl_factor * dx:
            raise CflError(
                f"CFL violated at step {self.step_index}: |v|={vmax:.3g} m/s, "
                f"dt={dt} s exceeds {p.cfl_factor} * {dx} m; reduce dt or sub-step"
            )

        self._maybe_reorder()
        barriers = self.colliders.barriers
        if barriers:
            if self._pos_prev is None or self._pos_prev.shape != self.pos.shape:
                self._pos_prev = self.pos.copy()
            else:
                np.copyto(self._pos_prev, self.pos)

        self.grid_mp.fill(0.0)
        origin = self._origin_arr
        box_c, box_r, box_h = self.colliders.packed_boxes()

        self.kernels.p2g(self.pos, self.vel, self.C, self.J, self.vol0, self.mass,
                         dt, dx, origin, p.eos_stiffness, p.eos_gamma, self.grid_mp)
        self.kernels.grid_update(self.grid_mp, dt, p.gravity,
                                 self._node_h, self._node_n,
                                 box_c, box_r, box_h, p.mu_t,
                                 origin, dx, 2, p.walls)
        if len(self.boulders):
            self._step_boulders(dt, origin, dx, box_c, box_r, box_h)

        bad = self.kernels.g2p(self.pos, self.vel, self.C, self.J, dt, dx, origin,
                               self.grid_mp,
                               self.terrain.heights, self.terrain.origin_x,
                               self.terrain.origin_y, self.terrain.cell_size,
                               box_c, box_r, box_h,
                               self._domain_lo, self._domain_hi)
        if bad >= 0:
            raise DivergenceError(
                f"non-finite state in particle {bad} at step {self.step_index}"
            )

        if barriers:
            self._record_barrier_contacts(dt)

        self.step_index += 1
        self.time = self.step_index * dt

    def run(self, n_steps: int) -> None:
        for _ in range(n_steps):
            self.step()

    def _maybe_reorder(self) -> None:
        """Periodically sort particles by grid cell for scatter locality.

        The stable sort is a pure function of the state, so reordering keeps
        runs bit-reproducible; it only changes storage order, not physics.
        """
        k = self.params.reorder_interval
        if not k or self.step_index % k or len(self.pos) < 2:
            return
        g = self.grid
        ij = ((self.pos - np.asarray(g.origin)) / g.dx).astype(np.intp)
        key = (ij[:, 0] * g.ny + ij[:, 1]) * g.nz + ij[:, 2]
        order = np.argsort(key, kind="stable")
        self.pos = np.ascontiguousarray(self.pos[order])
        self.vel = np.ascontiguousarray(self.vel[order])
        self.C = np.ascontiguousarray(self.C[order])
        self.J = self.J[order]
        self.vol0 = self.vol0[order]
        self.mass = self.mass[order]

    def _step_boulders(self, dt, origin, dx, box_c, box_r, box_h) -> None:
        b = self.boulders
        p = self.params
        rho_f, u_f = sample_grid(b.pos, self.grid_mp, origin, dx)
        frac = np.clip(rho_f / p.rho, 0.0, 1.0)
        vol = (4.0 / 3.0) * np.pi * b.radius ** 3

        force = np.zeros_like(b.pos)
        force[:, 2] -= b.mass * p.gravity
        force[:, 2] += frac * p.rho * vol * p.gravity          # buoyancy
        f_drag = (p.drag * b.mass * frac)[:, None] * (u_f - b.vel)
        force += f_drag

        # penalty contacts against terrain and boxes
        k_n = 0.05 * b.mass / dt ** 2
        c_n = 2.0 * 0.7 * np.sqrt(k_n * b.mass)
        surf, nrm = terrain_surface(self.terrain, b.pos[:, 0], b.pos[:, 1])
        overlap = b.radius - (b.pos[:, 2] - surf)
        force += self._penalty(overlap, nrm, b.vel, k_n, c_n, p.mu_t)
        for i in range(len(box_c)):
            box = BoxCollider(center=box_c[i], rotation=box_r[i].reshape(3, 3), half=box_h[i])
            overlap = b.radius - box.sdf(b.pos)
            if (overlap > 0).any():
                force += self._penalty(overlap, box.normal(b.pos), b.vel, k_n, c_n, p.mu_t)

        # momentum the fluid loses to drag comes back out of the grid
        scatter_impulse(b.pos, -f_drag * dt, self.grid_mp, origin, dx)

        b.vel += dt * force / b.mass[:, None]
        b.pos += dt * b.vel
        # hard floor: centers never sink below the surface
        surf, _ = terrain_surface(self.terrain, b.pos[:, 0], b.pos[:, 1])
        np.maximum(b.pos[:, 2], surf, out=b.pos[:, 2])
        np.clip(b.pos, self._domain_lo, self._domain_hi, out=b.pos)

    @staticmethod
    def _penalty(overlap, normals, vel, k_n, c_n, mu):
        """Spring-damper contact force, compressive only, with Coulomb drag."""
        f = np.zeros_like(vel)
        hit = overlap > 0.0
        if not hit.any():
            return f
        n = normals[hit]
        vn = np.einsum("mi,mi->m", vel[hit], n)
        fn = np.maximum(0.0, k_n[hit] * overlap[hit] - c_n[hit] * vn)
        f[hit] += fn[:, None] * n
        vt = vel[hit] - vn[:, None] * n
        vt_norm = np.linalg.norm(vt, axis=1)
        moving = vt_norm > 1e-9
        ft = np.zeros_like(vt)
        ft[moving] = -mu * fn[moving, None] * vt[moving] / vt_norm[moving, None]
        f[hit] += ft
        return f

    def _record_barrier_contacts(self, dt: float) -> None:
        margin = self.grid.dx
        vols = self.vol0 * self.J
        for bid, bar in self.colliders.barriers.items():
            log = self.contact_logs[bid]
            rot = bar.rotation()
            center = np.asarray(bar.center)
            half = bar.half_extents()
            d_now = (self.pos - center) @ rot
            in_face = (np.abs(d_now[:, 1]) <= half[1])
            # inflow is measured from particles still approaching the face;
            # splash and run-up sliding along it carry no inward speed
            slab = in_face & (np.abs(d_now[:, 0]) <= half[0] + 2 * margin) \
                & (d_now[:, 2] >= -half[2] - margin) & (d_now[:, 2] <= half[2] + margin)
            if slab.any():
                e_t = rot[:, 0]
                v_t = self.vel[slab] @ e_t
                approach = np.where(d_now[slab, 0] < 0, v_t, -v_t)
                incoming = approach > 1e-9
                if incoming.any():
                    log.max_approach_speed = max(log.max_approach_speed,
                                                 float(approach[incoming].max()))
                    sel = np.nonzero(slab)[0][incoming]
                    surf = self.terrain.interpolate(self.pos[sel, 0], self.pos[sel, 1])
                    depth = float(np.max(self.pos[sel, 2] - surf, initial=0.0))
                    log.max_depth = max(log.max_depth, depth)
                    d1 = d_now[sel, 1]
                    log.max_width = max(log.max_width, float(d1.max() - d1.min()))

            if self._pos_prev is not None:
                d_prev_t = (self._pos_prev - center) @ rot[:, 0]
                crossed = (d_prev_t * d_now[:, 0] < 0) & in_face
                if crossed.any():
                    rate = float(vols[crossed].sum()) / dt
                    log.flow_rates.append((self.time, rate))
                    denom = d_prev_t[crossed] - d_now[crossed, 0]
                    tstar = np.where(np.abs(denom) > 1e-30, d_prev_t[crossed] / denom, 0.5)
                    z_c = self._pos_prev[crossed, 2] + tstar * (self.pos[crossed, 2] - self._pos_prev[crossed, 2])
                    over = z_c > bar.top_z
                    log.overtopped_volume += float(vols[crossed][over].sum())

    # ------------------------------------------------------------------
    # observations

    def depth_field(self) -> np.ndarray:
        """Flow depth per terrain cell: column particle volume over cell area."""
        t = self.terrain
        out = np.zeros((t.n_rows, t.n_cols))
        if len(self.pos):
            r, c = t.cell_index(self.pos[:, 0], self.pos[:, 1])
            np.add.at(out, (r, c), self.vol0 * self.J)
            out /= t.cell_size ** 2
        return out

    def velocity_field(self) -> np.ndarray:
        """Volume-weighted mean horizontal speed per wet terrain cell."""
        t = self.terrain
        vol = np.zeros((t.n_rows, t.n_cols))
        mom = np.zeros((t.n_rows, t.n_cols))
        if len(self.pos):
            r, c = t.cell_index(self.pos[:, 0], self.pos[:, 1])
            w = self.vol0 * self.J
            speed = np.hypot(self.vel[:, 0], self.vel[:, 1])
            np.add.at(vol, (r, c), w)
            np.add.at(mom, (r, c), w * speed)
        out = np.zeros_like(vol)
        wet = vol > 0
        out[wet] = mom[wet] / vol[wet]
        return out

    def total_fluid_mass(self) -> float:
        return float(self.mass.sum())

    def total_fluid_volume(self) -> float:
        return float((self.vol0 * self.J).sum())

    def grid_mass_total(self) -> float:
        return float(self.grid_mp[..., 0].sum())

    def state_hash(self) -> str:
        barrier_repr = ";".join(
            f"{bid}:{sorted(b.to_dict().items())}" for bid, b in sorted(self.colliders.barriers.items())
        )
        return sha256_arrays(
            self.pos, self.vel, self.C, self.J, self.vol0, self.mass,
            self.boulders.pos, self.boulders.vel, self.boulders.radius, self.boulders.mass,
            self.step_index, self.time, barrier_repr,
        )

    # ------------------------------------------------------------------
    # snapshot / restore for session reset

    def snapshot(self) -> dict:
        return {
            "pos": self.pos.copy(), "vel": self.vel.copy(), "C": self.C.copy(),
            "J": self.J.copy(), "vol0": self.vol0.copy(), "mass": self.mass.copy(),
            "b_pos": self.boulders.pos.copy(), "b_vel": self.boulders.vel.copy(),
            "b_radius": self.boulders.radius.copy(), "b_mass": self.boulders.mass.copy(),
            "time": self.time, "step_index": self.step_index,
        }

    def restore(self, snap: dict) -> None:
        self.pos = snap["pos"].copy()
        self.vel = snap["vel"].copy()
        self.C = snap["C"].copy()
        self.J = snap["J"].copy()
        self.vol0 = snap["vol0"].copy()
        self.mass = snap["mass"].copy()
        self.boulders = BoulderSet(pos=snap["b_pos"].copy(), vel=snap["b_vel"].copy(),
                                   radius=snap["b_radius"].copy(), mass=snap["b_mass"].copy())
        self.time = snap["time"]
        self.step_index = snap["step_index"]
        self._pos_prev = None
        for log in self.contact_logs.values():
            log.max_approach_speed = 0.0
            log.max_depth = 0.0
            log.max_width = 0.0
            log.overtopped_volume = 0.0
            log.flow_rates.clear()


# functional aliases matching the operation names used elsewhere

def init_release(sim: DebrisFlowSim, polygon, volume: float,
                 particles_per_cell: int | None = None) -> DebrisFlowSim:
    sim.seed_release(polygon, volume, particles_per_cell)
    return sim


def step(sim: DebrisFlowSim) -> DebrisFlowSim:
    sim.step()
    return sim


def depth_field(sim: DebrisFlowSim) -> np.ndarray:
    return sim.depth_field()


def velocity_field(sim: DebrisFlowSim) -> np.ndarray:
    return sim.velocity_field()


def record_barrier_contact(sim: DebrisFlowSim, barrier_id: str) -> BarrierContactLog:
    return sim.contact_log(barrier_id)
