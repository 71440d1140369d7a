"""Scenario assembly and the data layers behind the analysis views.

Covers historical event tables (CSV), rainfall rasters, climate multipliers,
susceptibility layers, and the scenario JSON document that ties terrain,
buildings, release region, and solver parameters together.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .colliders import BoxCollider
from .engine import DebrisFlowSim, SimParams
from .errors import AlignmentError, DomainError, ScenarioError
from .terrain import TerrainGrid, load_dem, slope_field
from .util import sha256_arrays

EVENT_HEADER = ["id", "date", "x", "y", "scale", "description"]
DEFAULT_CLIMATE_MULTIPLIERS = (1.5, 2.5, 3.0)


@dataclass(frozen=True)
class LandslideEvent:
    id: str
    date: dt.date
    x: float
    y: float
    scale: float | str
    description: str = ""

    @property
    def numeric_scale(self) -> float | None:
        return float(self.scale) if isinstance(self.scale, (int, float)) else None


def load_events(path) -> list[LandslideEvent]:
    """Parse the events CSV; malformed rows fail with their line number."""
    events = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ScenarioError(f"{path}: empty events file, expected header") from None
        if [h.strip() for h in header] != EVENT_HEADER:
            raise ScenarioError(
                f"{path}: malformed header {header!r}, expected {','.join(EVENT_HEADER)}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(EVENT_HEADER):
                raise ScenarioError(f"{path}: line {line_no}: expected {len(EVENT_HEADER)} fields")
            try:
                date = dt.date.fromisoformat(row[1].strip())
            except ValueError:
                raise ScenarioError(f"{path}: line {line_no}: unparseable date {row[1]!r}") from None
            try:
                x, y = float(row[2]), float(row[3])
            except ValueError:
                raise ScenarioError(f"{path}: line {line_no}: non-numeric coordinates") from None
            scale: float | str
            try:
                scale = float(row[4])
            except ValueError:
                scale = row[4].strip()
            else:
                if scale <= 0:
                    raise ScenarioError(f"{path}: line {line_no}: scale must be positive")
            events.append(LandslideEvent(id=row[0].strip(), date=date, x=x, y=y,
                                         scale=scale, description=row[5]))
    return events


def save_events(path, events) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVENT_HEADER)
        for e in events:
            scale = repr(e.scale) if isinstance(e.scale, float) else e.scale
            writer.writerow([e.id, e.date.isoformat(), repr(e.x), repr(e.y), scale, e.description])


def _as_date(value, end_of_year: bool = False) -> dt.date:
    if isinstance(value, dt.date):
        return value
    if isinstance(value, int):
        return dt.date(value, 12, 31) if end_of_year else dt.date(value, 1, 1)
    return dt.date.fromisoformat(str(value))


def filter_events(events, t_start, t_end) -> list[LandslideEvent]:
    """Inclusive date-range filter; integers select whole years."""
    start = _as_date(t_start)
    end = _as_date(t_end, end_of_year=True)
    if start > end:
        raise DomainError(f"inverted range: {start} > {end}")
    return [e for e in events if start <= e.date <= end]


# ---------------------------------------------------------------------------
# rasters

@dataclass(frozen=True)
class RainfallRaster:
    """Rainfall intensity (mm/h) on a grid aligned to some terrain."""

    grid: TerrainGrid
    period: str = ""

    def __post_init__(self):
        if (self.grid.heights < 0).any():
            raise ScenarioError("rainfall intensities must be non-negative")

    def scaled(self, multiplier: float) -> "RainfallRaster":
        return RainfallRaster(grid=self.grid.with_heights(self.grid.heights * multiplier),
                              period=self.period)


def check_aligned(a: TerrainGrid, b: TerrainGrid, tol: float = 1e-9) -> None:
    """Extent and cell size must match within tol, and shapes exactly."""
    if a.n_cols != b.n_cols or a.n_rows != b.n_rows:
        raise AlignmentError(f"raster shape mismatch: {a.n_cols}x{a.n_rows} vs {b.n_cols}x{b.n_rows}")
    if abs(a.cell_size - b.cell_size) > tol:
        raise AlignmentError(f"cell size mismatch: {a.cell_size} vs {b.cell_size}")
    if abs(a.origin_x - b.origin_x) > tol or abs(a.origin_y - b.origin_y) > tol:
        raise AlignmentError("raster origins differ")


@dataclass(frozen=True)
class ClimateScenario:
    """A rainfall multiplier applied to a base scenario."""

    base_id: str
    multiplier: float

    def __post_init__(self):
        if self.multiplier <= 0:
            raise DomainError(f"climate multiplier must be positive, got {self.multiplier}")


# ---------------------------------------------------------------------------
# scenario

@dataclass(frozen=True)
class Building:
    footprint: tuple  # ((x, y), ...)
    height: float


@dataclass(frozen=True)
class Scenario:
    """Everything a session needs: terrain, buildings, release, parameters."""

    id: str
    terrain: TerrainGrid
    release_polygon: tuple
    release_volume: float
    params: SimParams = field(default_factory=SimParams)
    buildings: tuple = ()
    rainfall: RainfallRaster | None = None
    susceptibility: TerrainGrid | None = None
    population: TerrainGrid | None = None
    seed: int = 0
    duration: float = 15.0
    grid_dx: float | None = None
    headroom: float = 20.0
    boulders: dict | None = None       # {count, radius | [lo, hi], density?}
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for raster in (self.susceptibility, self.population):
            if raster is not None:
                check_aligned(self.terrain, raster)
        if self.rainfall is not None:
            check_aligned(self.terrain, self.rainfall.grid)

    def building_colliders(self) -> list[BoxCollider]:
        out = []
        for b in self.buildings:
            fp = np.asarray(b.footprint)
            cx, cy = fp[:, 0].mean(), fp[:, 1].mean()
            base = self.terrain.height_at(float(cx), float(cy))
            out.append(BoxCollider.from_footprint(fp, base_z=base, height=b.height))
        return out

    def build_sim(self, backend: str = "auto") -> DebrisFlowSim:
        sim = DebrisFlowSim(self.terrain, self.params,
                            buildings=self.building_colliders(),
                            dx=self.grid_dx, headroom=self.headroom,
                            backend=backend, seed=self.seed)
        sim.seed_release(self.release_polygon, self.release_volume)
        if self.boulders:
            radius = self.boulders.get("radius", 0.6)
            if isinstance(radius, (list, tuple)):
                radius = tuple(radius)
            sim.add_boulders(int(self.boulders["count"]), radius, self.release_polygon,
                             density=self.boulders.get("density"))
        return sim

    def content_hash(self) -> str:
        rain = self.rainfall.grid.heights if self.rainfall else b""
        return sha256_arrays(
            self.id, self.terrain.heights,
            (self.terrain.origin_x, self.terrain.origin_y, self.terrain.cell_size),
            np.asarray(self.release_polygon, dtype=np.float64), self.release_volume,
            repr(self.params), rain, self.seed, self.duration,
            repr(sorted((tuple(map(tuple, b.footprint)), b.height) for b in self.buildings)),
            repr(self.boulders),
        )


def scale_scenario(scenario: Scenario, multiplier: float) -> Scenario:
    """Climate-multiplier what-if: scales release volume and rainfall linearly.

    The linear volume mapping is a transparent stand-in for external rainfall
    response models; outputs carry provenance so nobody mistakes it for one.
    """
    if multiplier <= 0:
        raise DomainError(f"multiplier must be positive, got {multiplier}")
    rainfall = scenario.rainfall.scaled(multiplier) if scenario.rainfall else None
    prov = dict(scenario.provenance)
    if multiplier != 1.0:
        prov["climate_multiplier"] = prov.get("climate_multiplier", 1.0) * multiplier
        prov["volume_scaling"] = "linear-in-multiplier"
    return replace(scenario, release_volume=scenario.release_volume * multiplier,
                   rainfall=rainfall, provenance=prov)


def susceptibility_layer(scenario: Scenario, rainfall: RainfallRaster | None = None):
    """Relative initiation likelihood in [0, 1], plus layer metadata.

    Uses the scenario's attached susceptibility raster when present;
    otherwise a clearly tagged proxy: normalized slope times normalized
    rainfall.
    """
    rain = rainfall or scenario.rainfall
    if scenario.susceptibility is not None:
        values = scenario.susceptibility.heights
        peak = float(values.max())
        layer = values / peak if peak > 0 else np.zeros_like(values)
        return layer, {"layer": "susceptibility", "proxy": False, "colormap": "blue_red"}
    if rain is None:
        raise ScenarioError("susceptibility proxy needs a rainfall raster")
    check_aligned(scenario.terrain, rain.grid)
    theta = slope_field(scenario.terrain).theta
    theta_max = float(theta.max())
    theta_norm = theta / theta_max if theta_max > 0 else np.zeros_like(theta)
    rmax = float(rain.grid.heights.max())
    rain_norm = rain.grid.heights / rmax if rmax > 0 else np.zeros_like(rain.grid.heights)
    return theta_norm * rain_norm, {"layer": "susceptibility", "proxy": True, "colormap": "blue_red"}


# ---------------------------------------------------------------------------
# scenario file I/O

_PARAM_KEYS = {
    "dt": "dt", "gravity": "gravity", "rho": "rho", "alpha": "alpha",
    "R": "landing_R", "mu_t": "mu_t", "h_min": "h_min", "w_b": "w_b", "w_p": "w_p",
    "eos_stiffness": "eos_stiffness", "eos_gamma": "eos_gamma", "drag": "drag",
    "particles_per_cell": "particles_per_cell", "cfl_factor": "cfl_factor",
}


def load_buildings(path) -> tuple:
    """GeoJSON polygons with a `height` property (meters)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid GeoJSON: {e}") from None
    buildings = []
    for feat in doc.get("features", []):
        geom = feat.get("geometry") or {}
        if geom.get("type") != "Polygon":
            raise ScenarioError(f"{path}: building geometry must be Polygon, got {geom.get('type')}")
        props = feat.get("properties") or {}
        if "height" not in props:
            raise ScenarioError(f"{path}: building feature missing `height` property")
        ring = geom["coordinates"][0]
        buildings.append(Building(footprint=tuple((float(x), float(y)) for x, y in ring),
                                  height=float(props["height"])))
    return tuple(buildings)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ScenarioError(f"{path}: invalid JSON: {e}") from None

    def resolve(rel):
        return path.parent / rel

    for key in ("id", "terrain", "release"):
        if key not in doc:
            raise ScenarioError(f"{path}: missing required key {key!r}")
    try:
        terrain = load_dem(resolve(doc["terrain"]))
    except (OSError, ValueError) as e:
        raise ScenarioError(f"{path}: failed to load terrain: {e}") from None

    release = doc["release"]
    if "polygon" not in release or "volume_m3" not in release:
        raise ScenarioError(f"{path}: release needs `polygon` and `volume_m3`")

    params = SimParams()
    overrides = {}
    for key, value in (doc.get("params") or {}).items():
        if key not in _PARAM_KEYS:
            raise ScenarioError(f"{path}: unknown parameter {key!r}")
        overrides[_PARAM_KEYS[key]] = value
    if overrides:
        params = params.replace(**overrides)

    buildings = ()
    if doc.get("buildings"):
        buildings = load_buildings(resolve(doc["buildings"]))

    rasters = doc.get("rasters") or {}
    rainfall = None
    if rasters.get("rainfall"):
        rainfall = RainfallRaster(grid=load_dem(resolve(rasters["rainfall"])),
                                  period=rasters.get("rainfall_period", ""))
    susceptibility = load_dem(resolve(rasters["susceptibility"])) if rasters.get("susceptibility") else None
    population = load_dem(resolve(rasters["population"])) if rasters.get("population") else None

    try:
        return Scenario(
            id=str(doc["id"]),
            terrain=terrain,
            release_polygon=tuple((float(x), float(y)) for x, y in release["polygon"]),
            release_volume=float(release["volume_m3"]),
            params=params,
            buildings=buildings,
            rainfall=rainfall,
            susceptibility=susceptibility,
            population=population,
            seed=int(doc.get("seed", 0)),
            duration=float(doc.get("duration_s", 15.0)),
            grid_dx=float(doc["grid_dx"]) if doc.get("grid_dx") else None,
            headroom=float(doc.get("headroom_m", 20.0)),
            boulders=doc.get("boulders"),
            provenance={"source": str(path)},
        )
    except AlignmentError as e:
        raise ScenarioError(f"{path}: {e}") from None
