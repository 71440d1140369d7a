"""WebSocket steering service and HTTP data endpoints.

Wire protocol: JSON text envelopes `{v, type, seq, ...payload}`. Every
request is answered with an ack, an analysis message, or an error carrying
the request's seq; unknown types get an error, never a dropped connection.
Frames stream to all subscribers of a session at the publish rate with
drop-oldest backpressure (a slow client sees the newest frame, no backlog).

One connection may hold the steering lock per session; everyone else is an
observer whose steering commands are rejected with code `not_steering`.
"""

from __future__ import annotations

import asyncio
import base64
import json
import time
from collections import deque
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import fixtures
from .errors import (DomainError, MudflowError, PhaseError, ScenarioError,
                     UnknownBarrierError)
from .risk import query_point, runout_compare
from .scenario import Scenario, load_scenario, susceptibility_layer
from .session import Phase, Session
from .terrain import ascii_grid_text, slope_field

PROTOCOL_VERSION = 1
DEFAULT_PUBLISH_RATE = 20.0
FRAME_PARTICLE_CAP = 2000

STEERING_TYPES = {"load_scenario", "place_barrier", "move_barrier",
                  "set_barrier_params", "remove_barrier", "start", "pause", "reset"}
QUERY_TYPES = {"query_point", "run_compare", "get_log", "get_state"}


class ProtocolError(MudflowError):
    def __init__(self, code: str, detail: str = ""):
        super().__init__(detail or code)
        self.code = code


def _error_code(exc: Exception) -> str:
    if isinstance(exc, ProtocolError):
        return exc.code
    if isinstance(exc, PhaseError):
        return "bad_phase"
    if isinstance(exc, UnknownBarrierError):
        return "unknown_barrier"
    if isinstance(exc, ScenarioError):
        return "scenario_error"
    if isinstance(exc, (DomainError, KeyError, TypeError, ValueError)):
        return "bad_payload"
    return "internal"


class ScenarioStore:
    """Scenario files from a directory, with the synthetic fixtures as fallback."""

    def __init__(self, scenario_dir: str | None = None,
                 extra: dict[str, Scenario] | None = None):
        self.scenario_dir = Path(scenario_dir) if scenario_dir else None
        self.extra = dict(extra or {})
        self._builtin = {
            "vchannel": fixtures.v_channel_scenario,
            "plane": fixtures.plane_scenario,
            "two_ridge": fixtures.two_ridge_scenario,
            "island": fixtures.island_scenario,
        }

    def list(self) -> list[dict]:
        out = []
        seen = set()
        if self.scenario_dir and self.scenario_dir.is_dir():
            for path in sorted(self.scenario_dir.glob("*.json")):
                try:
                    doc = json.loads(path.read_text(encoding="utf-8"))
                except (OSError, json.JSONDecodeError):
                    continue
                sid = doc.get("id")
                if isinstance(sid, str) and "terrain" in doc:
                    out.append({"id": sid, "file": path.name, "source": "directory"})
                    seen.add(sid)
        for sid in self.extra:
            if sid not in seen:
                out.append({"id": sid, "source": "memory"})
                seen.add(sid)
        for sid in self._builtin:
            if sid not in seen:
                out.append({"id": sid, "source": "builtin"})
        return out

    def load(self, sid: str) -> Scenario:
        if sid in self.extra:
            return self.extra[sid]
        if self.scenario_dir and self.scenario_dir.is_dir():
            for path in sorted(self.scenario_dir.glob("*.json")):
                try:
                    doc = json.loads(path.read_text(encoding="utf-8"))
                except (OSError, json.JSONDecodeError):
                    continue
                if doc.get("id") == sid:
                    return load_scenario(path)
        if sid in self._builtin:
            return self._builtin[sid]()
        raise ScenarioError(f"unknown scenario {sid!r}")


class _Subscriber:
    def __init__(self):
        self.frames: deque[str] = deque(maxlen=1)  # drop-oldest backpressure
        self.event = asyncio.Event()

    def push(self, frame: str) -> None:
        self.frames.append(frame)
        self.event.set()


class LiveSession:
    """One steered simulation shared by any number of connections."""

    def __init__(self, sid: str, store: ScenarioStore, publish_rate: float,
                 backend: str, realtime: bool):
        self.sid = sid
        self.store = store
        self.publish_rate = publish_rate
        self.backend = backend
        self.realtime = realtime
        self.session: Session | None = None
        self.queue: asyncio.Queue = asyncio.Queue()
        self.subscribers: dict[int, _Subscriber] = {}
        self.steering_holder: int | None = None
        self._task: asyncio.Task | None = None
        self._closed = False
        self._sample_idx: np.ndarray | None = None
        self._last_frame_t = -1.0

    def ensure_task(self) -> None:
        if self._task is None:
            self._task = asyncio.create_task(self._run())

    async def close(self) -> None:
        self._closed = True
        await self.queue.put(None)
        if self._task is not None:
            await self._task

    async def submit(self, kind: str, payload: dict) -> dict:
        fut = asyncio.get_running_loop().create_future()
        await self.queue.put((kind, payload, fut))
        return await fut

    # ------------------------------------------------------------------

    async def _run(self) -> None:
        while not self._closed:
            while True:
                try:
                    item = self.queue.get_nowait()
                except asyncio.QueueEmpty:
                    break
                if item is None:
                    return
                await self._handle(item)
            s = self.session
            if s is not None and s.phase is Phase.RUNNING:
                t_wall = time.perf_counter()
                frame_dt = 1.0 / self.publish_rate
                s.run_until(min(s.sim.time + frame_dt, s.scenario.duration))
                self._publish_frame()
                if self.realtime:
                    remainder = frame_dt - (time.perf_counter() - t_wall)
                    await asyncio.sleep(max(0.0, remainder))
                else:
                    await asyncio.sleep(0)
            else:
                item = await self.queue.get()
                if item is None:
                    return
                await self._handle(item)

    async def _handle(self, item) -> None:
        kind, payload, fut = item
        try:
            result = await self._execute(kind, payload)
        except Exception as exc:  # protocol totality: report, never crash
            if not fut.done():
                fut.set_exception(exc)
            return
        if not fut.done():
            fut.set_result(result)

    async def _execute(self, kind: str, payload: dict) -> dict:
        if kind == "load_scenario":
            if self.session is None:
                scenario = await asyncio.to_thread(self.store.load, str(payload["id"]))
                self.session = await asyncio.to_thread(
                    Session, scenario, self.backend, self.publish_rate, self.store.load
                )
            else:
                # reload goes through the phase machine (Preparing only)
                await asyncio.to_thread(self.session.apply, "set_scenario", None,
                                        id=str(payload["id"]))
            self._sample_idx = self._decimation(self.session)
            self._last_frame_t = -1.0
            return {"scenario": self.session.scenario.id, "phase": self.session.phase.value}
        s = self.session
        if s is None:
            raise ProtocolError("no_scenario", "load a scenario first")
        if kind in STEERING_TYPES:
            s.apply(kind, **payload)
            return {"phase": s.phase.value}
        if kind == "query_point":
            series = query_point(s, float(payload["x"]), float(payload["y"]))
            return {"kind": "point_series", "series": series}
        if kind == "run_compare":
            result = await asyncio.to_thread(
                runout_compare, s.scenario, list(s.command_log), None,
                payload.get("h_min"), self.backend,
            )
            return {
                "kind": "runout_compare",
                "area_with": result["area_with"],
                "area_without": result["area_without"],
                "area_delta": result["area_delta"],
            }
        if kind == "get_log":
            return {"kind": "command_log",
                    "entries": [json.loads(c.to_json()) for c in s.command_log]}
        if kind == "get_state":
            return {"kind": "state", "phase": s.phase.value, "t": s.sim.time,
                    "step": s.sim.step_index, "hash": s.state_hash(),
                    "barriers": [b.to_dict() for b in s.barriers.values()]}
        raise ProtocolError("unknown_type", f"unhandled {kind!r}")

    # ------------------------------------------------------------------

    def _decimation(self, session: Session) -> np.ndarray:
        n = session.sim.particle_count
        if n <= FRAME_PARTICLE_CAP:
            return np.arange(n)
        rng = np.random.default_rng(session.scenario.seed)
        return np.sort(rng.choice(n, size=FRAME_PARTICLE_CAP, replace=False))

    def _publish_frame(self) -> None:
        s = self.session
        if s is None or not self.subscribers or s.sim.time == self._last_frame_t:
            return
        self._last_frame_t = s.sim.time
        payload = json.dumps(self._frame_dict(s))
        for sub in self.subscribers.values():
            sub.push(payload)

    def _frame_dict(self, s: Session) -> dict:
        return frame_payload(s, self._sample_idx)


def frame_payload(session: Session, sample_idx=None) -> dict:
    """Serializable frame snapshot: decimated particles, depth raster, stats."""
    sim = session.sim
    idx = sample_idx if sample_idx is not None else np.arange(sim.particle_count)
    pos = sim.pos[idx]
    speed = np.linalg.norm(sim.vel[idx], axis=1)
    depth = sim.depth_field().astype(np.float32)
    overtopped = sum(log.overtopped_volume for log in sim.contact_logs.values())
    terrain = sim.terrain
    return {
        "v": PROTOCOL_VERSION,
        "type": "frame",
        "t": sim.time,
        "phase": session.phase.value,
        "particles": np.column_stack([pos, speed]).round(3).tolist(),
        "boulders": np.column_stack([sim.boulders.pos, sim.boulders.radius]).tolist(),
        "depth_b64": base64.b64encode(np.ascontiguousarray(depth).tobytes()).decode(),
        "grid": {"n_rows": terrain.n_rows, "n_cols": terrain.n_cols,
                 "cell_size": terrain.cell_size,
                 "origin": [terrain.origin_x, terrain.origin_y]},
        "stats": {
            "particle_count": int(sim.particle_count),
            "max_speed": float(np.max(speed, initial=0.0)),
            "overtopped_volume": float(overtopped),
        },
    }


def record_frame_log(scenario, commands=(), t_end=None, publish_rate=20.0,
                     max_particles=FRAME_PARTICLE_CAP) -> list[dict]:
    """Headless frame capture: the frames a subscriber would have seen."""
    from .session import Session as _Session

    session = _Session(scenario, history_rate=publish_rate)
    for cmd in commands:
        session.apply(cmd["type"], **{k: v for k, v in cmd.items() if k != "type"})
    frames = []
    if session.phase is not Phase.RUNNING:
        session.apply("start")
    end = scenario.duration if t_end is None else t_end
    every = max(1, int(round(1.0 / (publish_rate * session.sim.params.dt))))
    rng = np.random.default_rng(scenario.seed)
    n = session.sim.particle_count
    idx = np.arange(n) if n <= max_particles else np.sort(
        rng.choice(n, size=max_particles, replace=False))
    while session.phase is Phase.RUNNING and session.sim.time < end - 1e-12:
        session.step_once()
        if session.sim.step_index % every == 0 or session.phase is not Phase.RUNNING:
            frames.append(frame_payload(session, idx))
    return frames


class SessionHub:
    def __init__(self, store: ScenarioStore, publish_rate: float, backend: str, realtime: bool):
        self.store = store
        self.publish_rate = publish_rate
        self.backend = backend
        self.realtime = realtime
        self.sessions: dict[str, LiveSession] = {}

    def get(self, sid: str) -> LiveSession:
        if sid not in self.sessions:
            self.sessions[sid] = LiveSession(sid, self.store, self.publish_rate,
                                             self.backend, self.realtime)
        live = self.sessions[sid]
        live.ensure_task()
        return live


def create_app(scenario_dir: str | None = None, publish_rate: float = DEFAULT_PUBLISH_RATE,
               backend: str = "auto", realtime: bool = False,
               scenarios: dict[str, Scenario] | None = None) -> FastAPI:
    app = FastAPI(title="mudflow steering service")
    store = ScenarioStore(scenario_dir, extra=scenarios)
    hub = SessionHub(store, publish_rate, backend, realtime)
    app.state.hub = hub
    app.state.store = store

    @app.get("/scenarios")
    async def scenarios_endpoint():
        return store.list()

    @app.get("/static/{filename}")
    async def static_endpoint(filename: str):
        """Plain files from the scenario directory (events.csv and friends)."""
        from fastapi.responses import PlainTextResponse

        if store.scenario_dir is None or "/" in filename or ".." in filename:
            return PlainTextResponse("not found", status_code=404)
        path = store.scenario_dir / filename
        if not path.is_file():
            return PlainTextResponse("not found", status_code=404)
        return PlainTextResponse(path.read_text(encoding="utf-8"))

    @app.get("/layers/{layer_id}")
    async def layer_endpoint(layer_id: str):
        try:
            sid, _, layer = layer_id.partition(".")
            if not layer:
                raise ScenarioError("layer id format is <scenario>.<layer>")
            scenario = store.load(sid)
            return _build_layer(scenario, layer)
        except MudflowError as exc:
            return {"error": str(exc), "layer": layer_id}

    @app.websocket("/session/{sid}")
    async def session_endpoint(ws: WebSocket, sid: str):
        await ws.accept()
        live = hub.get(sid)
        conn_id = id(ws)
        sub = _Subscriber()
        live.subscribers[conn_id] = sub
        sender = asyncio.create_task(_frame_sender(ws, sub))
        try:
            while True:
                raw = await ws.receive_text()
                reply = await _dispatch(live, conn_id, raw)
                if reply is not None:
                    await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            live.subscribers.pop(conn_id, None)
            if live.steering_holder == conn_id:
                live.steering_holder = None

    return app


async def _frame_sender(ws: WebSocket, sub: _Subscriber) -> None:
    while True:
        await sub.event.wait()
        sub.event.clear()
        while sub.frames:
            await ws.send_text(sub.frames.popleft())


async def _dispatch(live: LiveSession, conn_id: int, raw: str) -> dict | None:
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError:
        return {"type": "error", "code": "bad_json", "seq": None}
    if not isinstance(msg, dict):
        return {"type": "error", "code": "bad_json", "seq": None}
    seq = msg.get("seq")
    version = msg.get("v", PROTOCOL_VERSION)
    if version != PROTOCOL_VERSION:
        return {"type": "error", "code": "bad_version", "seq": seq}
    kind = msg.get("type")
    if not isinstance(kind, str):
        return {"type": "error", "code": "unknown_type", "seq": seq}

    if kind == "steering_lock":
        if live.steering_holder is None or live.steering_holder == conn_id:
            live.steering_holder = conn_id
            return {"type": "ack", "seq": seq, "granted": True}
        return {"type": "error", "code": "lock_held", "seq": seq}
    if kind == "steering_release":
        if live.steering_holder == conn_id:
            live.steering_holder = None
        return {"type": "ack", "seq": seq, "granted": False}

    payload = {k: v for k, v in msg.items() if k not in ("v", "type", "seq")}
    if kind in STEERING_TYPES:
        if live.steering_holder != conn_id:
            return {"type": "error", "code": "not_steering", "seq": seq}
        try:
            result = await live.submit(kind, payload)
        except Exception as exc:
            return {"type": "error", "code": _error_code(exc), "seq": seq,
                    "detail": str(exc)}
        return {"type": "ack", "seq": seq, **result}
    if kind in QUERY_TYPES:
        try:
            result = await live.submit(kind, payload)
        except Exception as exc:
            return {"type": "error", "code": _error_code(exc), "seq": seq,
                    "detail": str(exc)}
        return {"type": "analysis", "seq": seq, **result}
    return {"type": "error", "code": "unknown_type", "seq": seq}


def _build_layer(scenario: Scenario, layer: str) -> dict:
    meta: dict = {"layer": layer}
    if layer == "rainfall":
        if scenario.rainfall is None:
            raise ScenarioError(f"scenario {scenario.id!r} has no rainfall raster")
        grid = scenario.rainfall.grid
        raster = grid.heights
        meta["colormap"] = "blue_red"
        meta["period"] = scenario.rainfall.period
    elif layer == "susceptibility":
        raster, smeta = susceptibility_layer(scenario)
        grid = scenario.terrain.with_heights(raster)
        meta.update(smeta)
    elif layer == "slope":
        raster = slope_field(scenario.terrain).theta
        grid = scenario.terrain.with_heights(raster)
        meta["colormap"] = "blue_red"
    elif layer == "terrain":
        grid = scenario.terrain
        raster = grid.heights
        meta["colormap"] = "blue_red"
    else:
        raise ScenarioError(f"unknown layer {layer!r}")
    meta["min"] = float(np.min(raster))
    meta["max"] = float(np.max(raster))
    meta["ascii"] = ascii_grid_text(grid)
    return meta
