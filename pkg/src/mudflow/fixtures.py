"""Synthetic terrains and scenarios shipped in place of proprietary datasets.

Four terrains: an inclined plane, a V-shaped channel draining onto a plain,
a two-ridge valley, and a small island for fabrication demos. All are
deterministic closed forms so tests can rely on exact geometry.
"""

from __future__ import annotations

import datetime as dt
import json
from pathlib import Path

import numpy as np

from .engine import SimParams
from .scenario import Building, LandslideEvent, RainfallRaster, Scenario, save_events
from .terrain import TerrainGrid, save_dem


def make_plane(n_cols=48, n_rows=48, cell=2.0, slope_x=0.0, slope_y=0.0, base=0.0) -> TerrainGrid:
    xs = (np.arange(n_cols) + 0.5) * cell
    ys = (np.arange(n_rows) + 0.5) * cell
    xx, yy = np.meshgrid(xs, ys)
    return TerrainGrid(n_cols=n_cols, n_rows=n_rows, cell_size=cell, origin_x=0.0, origin_y=0.0,
                       heights=base + slope_x * xx + slope_y * yy)


def make_v_channel(n_cols=64, n_rows=41, cell=2.0, drop=0.35, side=0.4,
                   plain_frac=0.6, fade=20.0) -> TerrainGrid:
    """V-section channel descending along +x, opening onto a flat plain."""
    xs = (np.arange(n_cols) + 0.5) * cell
    ys = (np.arange(n_rows) + 0.5) * cell
    xx, yy = np.meshgrid(xs, ys)
    width = n_cols * cell
    y_c = n_rows * cell / 2.0
    x_plain = plain_frac * width
    downhill = drop * np.maximum(0.0, x_plain - xx)
    v_amp = np.clip((x_plain + fade - xx) / fade, 0.0, 1.0)
    v_shape = side * np.abs(yy - y_c) * v_amp
    return TerrainGrid(n_cols=n_cols, n_rows=n_rows, cell_size=cell, origin_x=0.0, origin_y=0.0,
                       heights=downhill + v_shape)


def make_two_ridge(n_cols=60, n_rows=48, cell=2.0, ridge_height=18.0,
                   sigma=9.0, drop=0.12) -> TerrainGrid:
    xs = (np.arange(n_cols) + 0.5) * cell
    ys = (np.arange(n_rows) + 0.5) * cell
    xx, yy = np.meshgrid(xs, ys)
    extent_y = n_rows * cell
    y_a, y_b = 0.25 * extent_y, 0.75 * extent_y
    ridges = ridge_height * (np.exp(-((yy - y_a) ** 2) / (2 * sigma ** 2))
                             + np.exp(-((yy - y_b) ** 2) / (2 * sigma ** 2)))
    downhill = drop * (n_cols * cell - xx)
    return TerrainGrid(n_cols=n_cols, n_rows=n_rows, cell_size=cell, origin_x=0.0, origin_y=0.0,
                       heights=ridges + downhill)


def make_island(n_cols=40, n_rows=30, cell=10.0, peak=120.0) -> TerrainGrid:
    xs = (np.arange(n_cols) + 0.5) * cell
    ys = (np.arange(n_rows) + 0.5) * cell
    xx, yy = np.meshgrid(xs, ys)
    cx, cy = n_cols * cell / 2.0, n_rows * cell / 2.0
    r = np.hypot(xx - cx, yy - cy)
    radius = 0.45 * min(n_cols, n_rows) * cell
    cone = np.maximum(0.0, peak * (1.0 - r / radius))
    bumps = 6.0 * np.sin(xx / 23.0) * np.cos(yy / 17.0) * (cone > 0)
    return TerrainGrid(n_cols=n_cols, n_rows=n_rows, cell_size=cell, origin_x=0.0, origin_y=0.0,
                       heights=np.maximum(cone + bumps, 0.0))


# ---------------------------------------------------------------------------
# canned scenarios

V_CHANNEL_RELEASE = ((6.0, 33.0), (22.0, 33.0), (22.0, 49.0), (6.0, 49.0))
V_CHANNEL_BARRIER_STATION = (62.0, 41.0)  # just upstream of the channel mouth

_DESK_PARAMS = SimParams(dt=0.004, particles_per_cell=8, mu_t=0.2)


def v_channel_scenario(volume: float = 150.0, seed: int = 11, duration: float = 10.0,
                       boulders: dict | None = None, buildings: bool = True) -> Scenario:
    terrain = make_v_channel()
    blds = ()
    if buildings:
        blds = (
            Building(footprint=((96.0, 30.0), (108.0, 30.0), (108.0, 38.0), (96.0, 38.0)), height=9.0),
            Building(footprint=((96.0, 46.0), (106.0, 46.0), (106.0, 52.0), (96.0, 52.0)), height=6.0),
        )
    rain = _storm_raster(terrain, center=(20.0, 41.0), peak=80.0, sigma=30.0)
    return Scenario(
        id="vchannel",
        terrain=terrain,
        release_polygon=V_CHANNEL_RELEASE,
        release_volume=volume,
        params=_DESK_PARAMS,
        buildings=blds,
        rainfall=RainfallRaster(grid=rain, period="design-storm"),
        seed=seed,
        duration=duration,
        grid_dx=1.0,
        headroom=8.0,
        boulders=boulders,
    )


def plane_scenario(volume: float = 60.0, seed: int = 3) -> Scenario:
    terrain = make_plane(slope_x=0.0)
    return Scenario(
        id="plane",
        terrain=terrain,
        release_polygon=((38.0, 38.0), (58.0, 38.0), (58.0, 58.0), (38.0, 58.0)),
        release_volume=volume,
        params=_DESK_PARAMS,
        seed=seed,
        duration=8.0,
        grid_dx=1.0,
        headroom=12.0,
    )


def two_ridge_scenario(volume: float = 120.0, seed: int = 7) -> Scenario:
    terrain = make_two_ridge()
    return Scenario(
        id="two_ridge",
        terrain=terrain,
        release_polygon=((8.0, 40.0), (24.0, 40.0), (24.0, 56.0), (8.0, 56.0)),
        release_volume=volume,
        params=_DESK_PARAMS,
        seed=seed,
        duration=10.0,
        grid_dx=1.0,
        headroom=16.0,
    )


def island_scenario(volume: float = 400.0, seed: int = 5) -> Scenario:
    terrain = make_island()
    return Scenario(
        id="island",
        terrain=terrain,
        release_polygon=((150.0, 120.0), (190.0, 120.0), (190.0, 160.0), (150.0, 160.0)),
        release_volume=volume,
        params=_DESK_PARAMS.replace(dt=0.008),
        seed=seed,
        duration=12.0,
        grid_dx=4.0,
        headroom=30.0,
    )


def _storm_raster(terrain: TerrainGrid, center, peak, sigma) -> TerrainGrid:
    xs, ys = terrain.cell_center_coords()
    xx, yy = np.meshgrid(xs, ys)
    r2 = (xx - center[0]) ** 2 + (yy - center[1]) ** 2
    return terrain.with_heights(peak * np.exp(-r2 / (2 * sigma ** 2)))


def sample_events() -> list[LandslideEvent]:
    """Small event table covering 1984 through 2021, inside the V-channel extent."""
    rows = [
        ("e1984a", dt.date(1984, 6, 12), 30.0, 44.0, 420.0, "channel head failure"),
        ("e1997a", dt.date(1997, 8, 2), 52.0, 38.0, 150.0, "minor bank slump"),
        ("e2005a", dt.date(2005, 8, 20), 44.0, 41.0, 900.0, "storm-triggered flow"),
        ("e2006a", dt.date(2006, 6, 1), 58.0, 43.0, 300.0, "post-storm reactivation"),
        ("e2008a", dt.date(2008, 6, 7), 36.0, 40.0, 1500.0, "major rainstorm event"),
        ("e2021a", dt.date(2021, 9, 30), 70.0, 41.0, 200.0, "runout near channel mouth"),
    ]
    return [LandslideEvent(id=i, date=d, x=x, y=y, scale=s, description=txt)
            for i, d, x, y, s, txt in rows]


def _buildings_geojson(buildings) -> dict:
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "properties": {"height": b.height},
                "geometry": {"type": "Polygon",
                             "coordinates": [[list(pt) for pt in b.footprint]]},
            }
            for b in buildings
        ],
    }


def write_fixture_tree(out_dir) -> dict:
    """Materialize every fixture as files a server or CLI can load."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for scn in (v_channel_scenario(), plane_scenario(), two_ridge_scenario(), island_scenario()):
        save_dem(scn.terrain, out / f"{scn.id}_terrain.asc")
        doc = {
            "id": scn.id,
            "terrain": f"{scn.id}_terrain.asc",
            "release": {"polygon": [list(p) for p in scn.release_polygon],
                        "volume_m3": scn.release_volume},
            "params": {"dt": scn.params.dt, "gravity": scn.params.gravity,
                       "rho": scn.params.rho, "alpha": scn.params.alpha,
                       "R": scn.params.landing_R, "mu_t": scn.params.mu_t,
                       "h_min": scn.params.h_min, "w_b": scn.params.w_b,
                       "w_p": scn.params.w_p},
            "seed": scn.seed,
            "duration_s": scn.duration,
            "grid_dx": scn.grid_dx,
            "headroom_m": scn.headroom,
            "rasters": {},
        }
        if scn.buildings:
            bpath = out / f"{scn.id}_buildings.geojson"
            bpath.write_text(json.dumps(_buildings_geojson(scn.buildings), indent=1))
            doc["buildings"] = bpath.name
        if scn.rainfall is not None:
            rpath = out / f"{scn.id}_rainfall.asc"
            save_dem(scn.rainfall.grid, rpath)
            doc["rasters"]["rainfall"] = rpath.name
        if scn.boulders:
            doc["boulders"] = scn.boulders
        path = out / f"{scn.id}.json"
        path.write_text(json.dumps(doc, indent=1))
        manifest[scn.id] = path.name
    save_events(out / "events.csv", sample_events())
    manifest["events"] = "events.csv"
    return manifest
