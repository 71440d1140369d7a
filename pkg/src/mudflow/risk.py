"""Risk analysis: impact force, landing velocity, vulnerability, risk rasters.

The hazard side is the impact force F = alpha * rho * v^2 * h0 * w evaluated
from per-cell time maxima of speed and depth; behind barriers the speed is
first attenuated by the landing coefficient R * cos(theta). Vulnerability is
the weighted sum of building and population densities. Risk is the product
of the normalized hazard and vulnerability rasters.

All functions are pure over immutable frame histories.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .session import BARRIER_COMMANDS, Session
from .terrain import ascii_grid_text, slope_field
from .util import points_in_polygon

COLORMAPS = ("blue_red", "orange_red", "purple", "red_yellow_green")


def _check_nonnegative(**values) -> None:
    for name, v in values.items():
        if np.any(np.asarray(v) < 0):
            raise DomainError(f"{name} must be non-negative")


def impact_force(alpha, rho, v, h0, w):
    """Peak dynamic impact force alpha * rho * v^2 * h0 * w (newtons).

    alpha defaults to 2.5 for rigid reinforced concrete barriers elsewhere in
    the package; here it is explicit. Accepts scalars or arrays.
    """
    _check_nonnegative(alpha=alpha, rho=rho, v=v, h0=h0, w=w)
    return alpha * rho * np.square(v) * h0 * w


def landing_velocity(v_r, R, theta):
    """Post-overtopping flow velocity v_i = R * cos(theta) * v_r.

    R in (0, 1] is the friction reduction factor; theta is the local terrain
    slope angle in radians, in [0, pi/2].
    """
    R_arr = np.asarray(R, dtype=np.float64)
    if np.any(R_arr <= 0) or np.any(R_arr > 1):
        raise DomainError(f"R must be in (0, 1], got {R}")
    theta_arr = np.asarray(theta, dtype=np.float64)
    if np.any(theta_arr < 0) or np.any(theta_arr > np.pi / 2):
        raise DomainError(f"theta must be in [0, pi/2], got {theta}")
    _check_nonnegative(v_r=v_r)
    out = R_arr * np.cos(theta_arr) * np.asarray(v_r, dtype=np.float64)
    return float(out) if out.ndim == 0 else out


def vulnerability(d_b, d_p, w_b, w_p):
    """Weighted density sum w_b * D_b + w_p * D_p, dimensionless in [0, 1]."""
    if abs(float(w_b) + float(w_p) - 1.0) > 1e-9:
        raise DomainError(f"weights must sum to 1, got {w_b} + {w_p}")
    if float(w_b) < 0 or float(w_p) < 0:
        raise DomainError("weights must be non-negative")
    for name, d in (("D_b", d_b), ("D_p", d_p)):
        arr = np.asarray(d)
        if np.any(arr < 0) or np.any(arr > 1):
            raise DomainError(f"{name} must lie in [0, 1]")
    out = np.asarray(w_b * np.asarray(d_b, dtype=np.float64) + w_p * np.asarray(d_p, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def risk(hazard_norm, vuln):
    """Risk = hazard * vulnerability, elementwise, both in [0, 1]."""
    for name, v in (("hazard", hazard_norm), ("vulnerability", vuln)):
        arr = np.asarray(v)
        if np.any(arr < 0) or np.any(arr > 1):
            raise DomainError(f"{name} must lie in [0, 1]")
    out = np.asarray(hazard_norm, dtype=np.float64) * np.asarray(vuln, dtype=np.float64)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# rasters over session histories

@dataclass(frozen=True)
class HazardSample:
    cell: tuple[int, int]
    v: float
    h0: float
    w: float
    force: float


@dataclass
class HazardResult:
    force: np.ndarray            # N per cell
    normalized: np.ndarray       # force / cap, in [0, 1]
    samples: list[HazardSample] = field(default_factory=list)
    colormap: str = "red_yellow_green"
    cap: float = 0.0


def downstream_mask(terrain, barrier) -> np.ndarray:
    """Cells behind the barrier plane, within its width corridor."""
    xs, ys = terrain.cell_center_coords()
    xx, yy = np.meshgrid(xs, ys)
    rot = barrier.rotation()
    dx = xx - barrier.center[0]
    dy = yy - barrier.center[1]
    along = dx * rot[0, 0] + dy * rot[1, 0]
    lateral = dx * rot[0, 1] + dy * rot[1, 1]
    return (along > barrier.thickness / 2) & (np.abs(lateral) <= barrier.width / 2)


def hazard_map(session: Session, attenuate_downstream_only: bool = True,
               force_cap: float | None = None) -> HazardResult:
    """Impact force raster from per-cell time maxima of speed and depth.

    Per-cell flow width is the cell width. Downstream of each barrier the
    speed is attenuated by the landing coefficient R * cos(theta) with the
    local slope angle; set attenuate_downstream_only=False to attenuate the
    whole footprint instead.
    """
    if session.history.n_frames == 0:
        raise DomainError("empty history: record at least one frame")
    terrain = session.sim.terrain
    params = session.sim.params
    v_eff = session.history.max_speed.copy()
    h_max = session.history.max_depth
    theta = slope_field(terrain).theta

    if attenuate_downstream_only:
        for barrier in session.barriers.values():
            mask = downstream_mask(terrain, barrier)
            v_eff[mask] = landing_velocity(v_eff[mask], params.landing_R, theta[mask])
    else:
        v_eff = landing_velocity(v_eff, params.landing_R, theta)

    force = impact_force(params.alpha, params.rho, v_eff, h_max, terrain.cell_size)
    cap = force_cap if force_cap is not None else float(force.max())
    normalized = force / cap if cap > 0 else np.zeros_like(force)
    np.clip(normalized, 0.0, 1.0, out=normalized)

    samples = []
    for r, c in zip(*np.nonzero(h_max > 0)):
        samples.append(HazardSample(cell=(int(r), int(c)), v=float(v_eff[r, c]),
                                    h0=float(h_max[r, c]), w=terrain.cell_size,
                                    force=float(force[r, c])))
    return HazardResult(force=force, normalized=normalized, samples=samples, cap=cap)


def vulnerability_field(scenario, terrain=None) -> np.ndarray:
    """Per-cell vulnerability from building coverage and population density.

    Building density is the fraction of each cell covered by footprints
    (sampled at cell centers); population density comes from the scenario's
    optional raster, normalized to [0, 1], else zeros.
    """
    terrain = terrain or scenario.terrain
    xs, ys = terrain.cell_center_coords()
    xx, yy = np.meshgrid(xs, ys)
    d_b = np.zeros((terrain.n_rows, terrain.n_cols))
    for b in scenario.buildings:
        inside = points_in_polygon(xx.ravel(), yy.ravel(), b.footprint).reshape(d_b.shape)
        d_b[inside] = 1.0
    if scenario.population is not None:
        pop = scenario.population.heights
        peak = float(pop.max())
        d_p = pop / peak if peak > 0 else np.zeros_like(pop)
    else:
        d_p = np.zeros_like(d_b)
    return vulnerability(d_b, d_p, scenario.params.w_b, scenario.params.w_p)


@dataclass
class RiskLayers:
    hazard_norm: np.ndarray
    vulnerability: np.ndarray
    risk: np.ndarray
    footprint_with: np.ndarray | None = None
    footprint_without: np.ndarray | None = None
    colormaps: dict = field(default_factory=lambda: {
        "hazard": "red_yellow_green",
        "vulnerability": "blue_red",
        "risk": "red_yellow_green",
        "footprint": "purple",
    })


def build_risk_layers(session: Session, scenario) -> RiskLayers:
    hz = hazard_map(session)
    vuln = vulnerability_field(scenario)
    return RiskLayers(hazard_norm=hz.normalized, vulnerability=vuln,
                      risk=hz.normalized * vuln)


# ---------------------------------------------------------------------------
# runout comparison and queries

def footprint(history_max_depth: np.ndarray, h_min: float) -> np.ndarray:
    return history_max_depth >= h_min


def runout_compare(scenario, commands, t_end: float | None = None,
                   h_min: float | None = None, backend: str = "auto") -> dict:
    """Replay twice, with and without barrier commands, and compare footprints.

    Returns footprint masks, areas (m^2), and area_delta = without - with.
    """
    commands = list(commands)
    stripped = _strip_barrier_commands(commands)
    with_session = Session.replay(scenario, commands, t_end=t_end, backend=backend)
    without_session = Session.replay(scenario, stripped, t_end=t_end, backend=backend)
    h_min = scenario.params.h_min if h_min is None else h_min
    cell_area = scenario.terrain.cell_size ** 2
    fp_with = footprint(with_session.history.max_depth, h_min)
    fp_without = footprint(without_session.history.max_depth, h_min)
    return {
        "footprint_with": fp_with,
        "footprint_without": fp_without,
        "area_with": float(fp_with.sum() * cell_area),
        "area_without": float(fp_without.sum() * cell_area),
        "area_delta": float((fp_without.sum() - fp_with.sum()) * cell_area),
        "final_hash_with": with_session.state_hash(),
        "final_hash_without": without_session.state_hash(),
    }


def _strip_barrier_commands(commands):
    """Drop barrier commands and renumber so the log stays gap-free."""
    kept = [c for c in commands if c.type not in BARRIER_COMMANDS]
    out = []
    for i, c in enumerate(kept):
        out.append(type(c)(seq=i + 1, t=c.t, type=c.type, payload=c.payload))
    return out


def query_point(session: Session, x: float, y: float) -> list[tuple[float, float]]:
    """Flow depth time series at the cell containing (x, y)."""
    terrain = session.sim.terrain
    if not bool(terrain.contains(x, y)):
        raise DomainError(f"query point ({x}, {y}) outside terrain extent")
    r, c = terrain.cell_index(x, y)
    return [(t, float(frame[r, c])) for t, frame in
            zip(session.history.times, session.history.depth_frames)]


def barrier_report(session: Session, barrier_id: str) -> dict:
    """Peak impact force, peak flow rate, and overtopped volume for a barrier."""
    log = session.barrier_contact_log(barrier_id)
    barrier = session.barriers.get(barrier_id)
    alpha = barrier.alpha if barrier else session.sim.params.alpha
    peak_force = impact_force(alpha, session.sim.params.rho,
                              log.max_approach_speed, log.max_depth, log.max_width)
    return {
        "barrier_id": barrier_id,
        "peak_impact_force": float(peak_force),
        "peak_flow_rate": log.peak_flow_rate,
        "overtopped_volume": log.overtopped_volume,
        "max_approach_speed": log.max_approach_speed,
        "max_depth": log.max_depth,
        "max_width": log.max_width,
    }


# ---------------------------------------------------------------------------
# layer export: ESRI ASCII raster + JSON sidecar

def export_layer(out_dir, name: str, raster: np.ndarray, terrain, colormap: str,
                 **extra_meta) -> tuple:
    """Write `<name>.asc` and `<name>.json` (layer, colormap, min, max)."""
    import json
    from pathlib import Path

    if colormap not in COLORMAPS:
        raise DomainError(f"unknown colormap {colormap!r}, expected one of {COLORMAPS}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = terrain.with_heights(np.asarray(raster, dtype=np.float64))
    asc = out / f"{name}.asc"
    asc.write_text(ascii_grid_text(grid), encoding="utf-8")
    meta = {
        "layer": name,
        "colormap": colormap,
        "min": float(np.min(raster)),
        "max": float(np.max(raster)),
        **extra_meta,
    }
    sidecar = out / f"{name}.json"
    sidecar.write_text(json.dumps(meta, indent=1), encoding="utf-8")
    return asc, sidecar
