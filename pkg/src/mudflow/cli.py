"""Operator CLI: serve, run, replay, compare, export-layers, fabricate.

Exit codes: 0 ok, 2 configuration error, 3 scenario error.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from . import fixtures as fixtures_mod
from . import physicalize, risk
from .errors import ConfigError, DemParseError, MudflowError, ScenarioError
from .scenario import Scenario, load_scenario
from .session import Session, read_command_log, write_command_log
from .terrain import load_dem

_BUILTIN = {
    "vchannel": fixtures_mod.v_channel_scenario,
    "plane": fixtures_mod.plane_scenario,
    "two_ridge": fixtures_mod.two_ridge_scenario,
    "island": fixtures_mod.island_scenario,
}


def _scenario_arg(value: str) -> Scenario:
    path = Path(value)
    if path.exists():
        return load_scenario(path)
    if value in _BUILTIN:
        return _BUILTIN[value]()
    raise ScenarioError(f"scenario {value!r}: no such file and not a built-in fixture "
                        f"({', '.join(_BUILTIN)})")


@click.group()
def cli():
    """Debris-flow steering workbench."""


@cli.command()
@click.option("--scenario-dir", default=None, help="Directory of scenario JSON files "
              "(default: $LANDSAR_SCENARIO_DIR).")
@click.option("--scenario", "scenario_file", default=None,
              help="Single scenario file to expose in addition to the directory.")
@click.option("--port", type=int, default=None, help="Port (default: $LANDSAR_PORT or 8700).")
@click.option("--host", default="127.0.0.1")
@click.option("--publish-rate", type=float, default=20.0)
@click.option("--backend", default="auto", type=click.Choice(["auto", "compiled", "numpy"]))
@click.option("--realtime/--flat-out", default=True,
              help="Pace the solver to wall clock or run as fast as possible.")
def serve(scenario_dir, scenario_file, port, host, publish_rate, backend, realtime):
    """Run the WebSocket steering service."""
    import uvicorn

    from .server import create_app

    scenario_dir = scenario_dir or os.environ.get("LANDSAR_SCENARIO_DIR")
    if port is None:
        raw = os.environ.get("LANDSAR_PORT", "8700")
        try:
            port = int(raw)
        except ValueError:
            raise ConfigError(f"LANDSAR_PORT must be an integer, got {raw!r}") from None
    extra = None
    if scenario_file:
        scn = _scenario_arg(scenario_file)
        extra = {scn.id: scn}
    app = create_app(scenario_dir=scenario_dir, publish_rate=publish_rate,
                     backend=backend, realtime=realtime, scenarios=extra)
    uvicorn.run(app, host=host, port=port, log_level="info")


def _replay(scenario: Scenario, commands_path, t_end=None, backend="auto") -> Session:
    commands = read_command_log(commands_path) if commands_path else []
    return Session.replay(scenario, commands, t_end=t_end, backend=backend)


@cli.command()
@click.option("--scenario", "scenario_arg", required=True)
@click.option("--commands", "commands_path", default=None, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--t-end", type=float, default=None)
@click.option("--backend", default="auto", type=click.Choice(["auto", "compiled", "numpy"]))
def run(scenario_arg, commands_path, out_dir, t_end, backend):
    """Headless run: replay a command log and write layers plus a report."""
    scenario = _scenario_arg(scenario_arg)
    session = _replay(scenario, commands_path, t_end=t_end, backend=backend)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    terrain = scenario.terrain
    hz = risk.hazard_map(session)
    vuln = risk.vulnerability_field(scenario)
    risk_raster = hz.normalized * vuln
    fp = risk.footprint(session.history.max_depth, scenario.params.h_min)
    risk.export_layer(out, "hazard", hz.normalized, terrain, "red_yellow_green",
                      force_cap_n=hz.cap)
    risk.export_layer(out, "vulnerability", vuln, terrain, "blue_red")
    risk.export_layer(out, "risk", risk_raster, terrain, "red_yellow_green")
    risk.export_layer(out, "footprint", fp.astype(float), terrain, "purple",
                      h_min_m=scenario.params.h_min, kind="deposit-footprint")
    risk.export_layer(out, "flow_paths", session.history.max_speed, terrain, "orange_red")
    risk.export_layer(out, "depth_final", session.sim.depth_field(), terrain, "blue_red")

    report = {
        "scenario": scenario.id,
        "final_hash": session.state_hash(),
        "time": session.sim.time,
        "steps": session.sim.step_index,
        "phase": session.phase.value,
        "footprint_area_m2": float(fp.sum() * terrain.cell_size ** 2),
        "total_fluid_volume_m3": session.sim.total_fluid_volume(),
        "barriers": [risk.barrier_report(session, bid) for bid in session.barriers],
    }
    (out / "report.json").write_text(json.dumps(report, indent=1))
    write_command_log(out / "commands.jsonl", session.command_log)
    click.echo(json.dumps({"final_hash": report["final_hash"],
                           "footprint_area_m2": report["footprint_area_m2"]}))


@cli.command()
@click.option("--scenario", "scenario_arg", required=True)
@click.option("--commands", "commands_path", required=True, type=click.Path(exists=True))
@click.option("--t-end", type=float, default=None)
@click.option("--expect-hash", default=None, help="Fail unless the final state hash matches.")
@click.option("--backend", default="auto", type=click.Choice(["auto", "compiled", "numpy"]))
def replay(scenario_arg, commands_path, t_end, expect_hash, backend):
    """Replay a command log and print the final state hash."""
    scenario = _scenario_arg(scenario_arg)
    session = _replay(scenario, commands_path, t_end=t_end, backend=backend)
    final = session.state_hash()
    click.echo(final)
    if expect_hash and final != expect_hash:
        click.echo(f"hash mismatch: expected {expect_hash}", err=True)
        sys.exit(1)


@cli.command()
@click.option("--scenario", "scenario_arg", required=True)
@click.option("--commands", "commands_path", required=True, type=click.Path(exists=True))
@click.option("--h-min", type=float, default=None)
@click.option("--out", "out_dir", default=None, type=click.Path())
@click.option("--backend", default="auto", type=click.Choice(["auto", "compiled", "numpy"]))
def compare(scenario_arg, commands_path, h_min, out_dir, backend):
    """Runout with and without barriers: footprints and area delta."""
    scenario = _scenario_arg(scenario_arg)
    commands = read_command_log(commands_path)
    result = risk.runout_compare(scenario, commands, h_min=h_min, backend=backend)
    summary = {k: result[k] for k in ("area_with", "area_without", "area_delta")}
    click.echo(json.dumps(summary))
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        risk.export_layer(out, "footprint_with", result["footprint_with"].astype(float),
                          scenario.terrain, "purple")
        risk.export_layer(out, "footprint_without", result["footprint_without"].astype(float),
                          scenario.terrain, "purple")
        (out / "compare.json").write_text(json.dumps(summary, indent=1))


@cli.command("export-layers")
@click.option("--scenario", "scenario_arg", required=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def export_layers(scenario_arg, out_dir):
    """Write the scenario's data layers (rainfall, susceptibility, slope)."""
    from .scenario import susceptibility_layer
    from .terrain import slope_field

    scenario = _scenario_arg(scenario_arg)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    terrain = scenario.terrain
    written = []
    if scenario.rainfall is not None:
        risk.export_layer(out, "rainfall", scenario.rainfall.grid.heights, terrain,
                          "blue_red", period=scenario.rainfall.period)
        written.append("rainfall")
        layer, meta = susceptibility_layer(scenario)
        risk.export_layer(out, "susceptibility", layer, terrain, "blue_red",
                          proxy=meta["proxy"])
        written.append("susceptibility")
    risk.export_layer(out, "slope", slope_field(terrain).theta, terrain, "blue_red",
                      units="radians")
    written.append("slope")
    click.echo(json.dumps({"written": written}))


@cli.command()
@click.option("--scenario", "scenario_arg", default=None)
@click.option("--terrain", "terrain_path", default=None, type=click.Path(exists=True))
@click.option("--rows", type=int, default=2, show_default=True)
@click.option("--cols", type=int, default=2, show_default=True)
@click.option("--z-scale", type=float, default=1.5, show_default=True)
@click.option("--xy-scale", type=float, default=0.001, show_default=True,
              help="Model meters per world meter.")
@click.option("--base-mm", type=float, default=6.0)
@click.option("--pitch-mm", type=float, default=25.0)
@click.option("--radius-mm", type=float, default=3.0)
@click.option("--shell-mm", type=float, default=4.0)
@click.option("--solid", is_flag=True, help="No cavity or pillars.")
@click.option("--envelope", default="300,300,300", help="Printer envelope in mm, X,Y,Z.")
@click.option("--out", "out_dir", required=True, type=click.Path())
def fabricate(scenario_arg, terrain_path, rows, cols, z_scale, xy_scale, base_mm,
              pitch_mm, radius_mm, shell_mm, solid, envelope, out_dir):
    """Export the terrain as tiled, watertight, pillar-supported STL solids."""
    if (scenario_arg is None) == (terrain_path is None):
        raise ConfigError("pass exactly one of --scenario or --terrain")
    if scenario_arg:
        grid = _scenario_arg(scenario_arg).terrain
        name = scenario_arg
    else:
        grid = load_dem(terrain_path)
        name = Path(terrain_path).stem
    try:
        env = tuple(float(v) for v in envelope.split(","))
        if len(env) != 3:
            raise ValueError
    except ValueError:
        raise ConfigError(f"--envelope must be three comma-separated numbers, got {envelope!r}") from None

    config = physicalize.FabricationConfig(
        z_scale=z_scale, xy_scale=xy_scale, base_thickness_mm=base_mm,
        pillar_pitch_mm=pitch_mm, pillar_radius_mm=radius_mm,
        shell_thickness_mm=None if solid else shell_mm,
        tile_rows=rows, tile_cols=cols, envelope_mm=env,
    )
    tiles = physicalize.tile(grid, config, rows, cols)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"source": name, "z_scale": z_scale, "xy_scale": xy_scale,
                "rows": rows, "cols": cols, "tiles": []}
    for mesh in tiles:
        path = out / f"{name}_{mesh.name}.stl"
        physicalize.export_stl(mesh, path)
        lo, hi = mesh.bbox()
        manifest["tiles"].append({
            "file": path.name,
            "triangles": mesh.n_triangles,
            "size_mm": [round(float(v), 3) for v in (hi - lo)],
            "volume_mm3": round(mesh.signed_volume(), 3),
        })
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1))
    click.echo(json.dumps({"tiles": len(tiles), "out": str(out)}))


@cli.command("fixtures")
@click.option("--out", "out_dir", required=True, type=click.Path())
def fixtures_cmd(out_dir):
    """Write the synthetic fixture scenarios (terrain, events, rainfall)."""
    manifest = fixtures_mod.write_fixture_tree(out_dir)
    click.echo(json.dumps(manifest))


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        return 2
    except click.exceptions.ClickException as exc:
        exc.show()
        return 2
    except ConfigError as exc:
        click.echo(f"config error: {exc}", err=True)
        return 2
    except (ScenarioError, DemParseError) as exc:
        click.echo(f"scenario error: {exc}", err=True)
        return 3
    except MudflowError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
