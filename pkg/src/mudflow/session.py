"""Steerable simulation sessions: phases, command log, deterministic replay.

A session owns one simulation and applies steering commands only at step
boundaries, which makes every run a pure function of (scenario, command
schedule). The command log serializes as one JSON object per line with keys
`seq`, `t`, `type` plus the command payload; replaying a log reproduces the
original run bit for bit.

Phase machine: Preparing -> Running, Running <-> Paused, any -> Finished
(when the scenario duration is reached), Finished -> Preparing via reset.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .colliders import Barrier
from .errors import CommandLogError, PhaseError, ScenarioError, UnknownBarrierError


class Phase(str, Enum):
    PREPARING = "Preparing"
    RUNNING = "Running"
    PAUSED = "Paused"
    FINISHED = "Finished"


BARRIER_COMMANDS = {"place_barrier", "move_barrier", "set_barrier_params", "remove_barrier"}

# which phases each command may run in
_LEGAL_PHASES = {
    "place_barrier": set(Phase),
    "move_barrier": set(Phase),
    "set_barrier_params": set(Phase),
    "remove_barrier": set(Phase),
    "start": {Phase.PREPARING, Phase.PAUSED},
    "pause": {Phase.RUNNING},
    "reset": {Phase.FINISHED, Phase.PREPARING},
    "set_scenario": {Phase.PREPARING},
}


@dataclass(frozen=True)
class SteeringCommand:
    seq: int
    t: float
    type: str
    payload: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"seq": self.seq, "t": self.t, "type": self.type, **self.payload})

    @classmethod
    def from_json(cls, line: str) -> "SteeringCommand":
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise CommandLogError(f"malformed command log line: {e}") from None
        for key in ("seq", "t", "type"):
            if key not in obj:
                raise CommandLogError(f"command log entry missing {key!r}: {line.strip()}")
        payload = {k: v for k, v in obj.items() if k not in ("seq", "t", "type")}
        return cls(seq=int(obj["seq"]), t=float(obj["t"]), type=str(obj["type"]), payload=payload)


def write_command_log(path, commands) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cmd in commands:
            fh.write(cmd.to_json() + "\n")


def read_command_log(path) -> list[SteeringCommand]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(SteeringCommand.from_json(line))
    return out


def validate_log(commands) -> None:
    """Sequence numbers must be consecutive from 1; duplicates and gaps fail."""
    for i, cmd in enumerate(commands):
        expect = i + 1
        if cmd.seq != expect:
            if i and cmd.seq == commands[i - 1].seq:
                raise CommandLogError(f"duplicated sequence number {cmd.seq}")
            raise CommandLogError(f"log sequence gap: expected {expect}, found {cmd.seq}")


class HistoryRecorder:
    """Depth frames plus running per-cell maxima, sampled on step boundaries."""

    def __init__(self, terrain, dt: float, rate: float = 20.0):
        self.terrain = terrain
        self.every = max(1, int(round(1.0 / (rate * dt))))
        self.times: list[float] = []
        self.depth_frames: list[np.ndarray] = []
        self.max_depth = np.zeros((terrain.n_rows, terrain.n_cols))
        self.max_speed = np.zeros((terrain.n_rows, terrain.n_cols))

    def clear(self) -> None:
        self.times.clear()
        self.depth_frames.clear()
        self.max_depth.fill(0.0)
        self.max_speed.fill(0.0)

    def record(self, sim) -> None:
        depth = sim.depth_field()
        speed = sim.velocity_field()
        np.maximum(self.max_depth, depth, out=self.max_depth)
        np.maximum(self.max_speed, speed, out=self.max_speed)
        self.times.append(sim.time)
        self.depth_frames.append(depth.astype(np.float32))

    def maybe_record(self, sim) -> bool:
        if sim.step_index % self.every == 0:
            self.record(sim)
            return True
        return False

    @property
    def n_frames(self) -> int:
        return len(self.times)


class Session:
    """One steerable simulation: command application, stepping, history."""

    def __init__(self, scenario, backend: str = "auto", history_rate: float = 20.0,
                 scenario_resolver=None):
        self.scenario = scenario
        self.backend = backend
        self.history_rate = history_rate
        self.scenario_resolver = scenario_resolver
        self.phase = Phase.PREPARING
        self.command_log: list[SteeringCommand] = []
        self.pending: deque = deque()
        self._next_seq = 1
        self._build()

    def _build(self) -> None:
        self.sim = self.scenario.build_sim(backend=self.backend)
        self.barriers: dict[str, Barrier] = {}
        self.sim.set_barriers(self.barriers)
        self.history = HistoryRecorder(self.sim.terrain, self.sim.params.dt, self.history_rate)
        self.history.record(self.sim)
        self._initial_snapshot = self.sim.snapshot()
        self.initial_hash = self.state_hash()

    # ------------------------------------------------------------------
    # commands

    def queue(self, type: str, **payload) -> None:
        """Thread-safe enough for one producer: applied at the next boundary."""
        self.pending.append((type, payload))

    def apply(self, type: str, _seq: int | None = None, **payload) -> SteeringCommand:
        """Validate against the phase machine, enact, and append to the log.

        The command is stamped with the current simulation time, so a replay
        applies it at exactly the same step boundary.
        """
        if type not in _LEGAL_PHASES:
            raise CommandLogError(f"unknown command type {type!r}")
        if self.phase not in _LEGAL_PHASES[type]:
            raise PhaseError(type, self.phase.value)
        seq = self._next_seq if _seq is None else _seq
        cmd = SteeringCommand(seq=seq, t=self.sim.time, type=type, payload=payload)
        self._enact(cmd)
        self._next_seq = seq + 1
        self.command_log.append(cmd)
        return cmd

    def _enact(self, cmd: SteeringCommand) -> None:
        p = cmd.payload
        kind = cmd.type
        if kind == "place_barrier":
            barrier = self._barrier_from_payload(p["barrier"])
            self.barriers[barrier.id] = barrier
            self.sim.set_barriers(self.barriers)
        elif kind == "move_barrier":
            bid = str(p["id"])
            if bid not in self.barriers:
                raise UnknownBarrierError(bid)
            center = self._snap_center(p["center"], self.barriers[bid].height)
            self.barriers[bid] = self.barriers[bid].moved(center, p.get("yaw"))
            self.sim.set_barriers(self.barriers)
        elif kind == "set_barrier_params":
            bid = str(p["id"])
            if bid not in self.barriers:
                raise UnknownBarrierError(bid)
            old = self.barriers[bid]
            new = old.resized(height=p.get("height"), width=p.get("width"),
                              face_angle=p.get("face_angle"))
            if new.height != old.height:
                # keep the base on the ground when the height changes
                base = old.center[2] - old.height / 2
                new = new.moved((old.center[0], old.center[1], base + new.height / 2))
            self.barriers[bid] = new
            self.sim.set_barriers(self.barriers)
        elif kind == "remove_barrier":
            bid = str(p["id"])
            if bid not in self.barriers:
                raise UnknownBarrierError(bid)
            del self.barriers[bid]
            self.sim.set_barriers(self.barriers)
        elif kind == "start":
            self.phase = Phase.RUNNING
        elif kind == "pause":
            self.phase = Phase.PAUSED
        elif kind == "reset":
            self.sim.restore(self._initial_snapshot)
            self.barriers = {}
            self.sim.set_barriers(self.barriers)
            self.history.clear()
            self.history.record(self.sim)
            self.phase = Phase.PREPARING
        elif kind == "set_scenario":
            if self.scenario_resolver is None:
                raise ScenarioError("no scenario resolver attached to this session")
            self.scenario = self.scenario_resolver(str(p["id"]))
            self._build()

    def _barrier_from_payload(self, b: dict) -> Barrier:
        b = dict(b)
        height = float(b.get("height", 5.0))
        b["center"] = self._snap_center(b["center"], height)
        return Barrier.from_dict(b)

    def _snap_center(self, center, height: float):
        """2-component centers sit on the terrain; 3-component pass through."""
        center = [float(c) for c in center]
        if len(center) == 2:
            z = self.sim.terrain.height_at(center[0], center[1]) + height / 2
            center = [center[0], center[1], z]
        return tuple(center)

    # ------------------------------------------------------------------
    # stepping

    def _drain_pending(self) -> None:
        while self.pending:
            kind, payload = self.pending.popleft()
            self.apply(kind, **payload)

    def step_once(self) -> None:
        self._drain_pending()
        if self.phase is not Phase.RUNNING:
            return
        self.sim.step()
        self.history.maybe_record(self.sim)
        if self.sim.time >= self.scenario.duration - 1e-12:
            self.phase = Phase.FINISHED
            if self.sim.step_index % self.history.every:
                self.history.record(self.sim)

    def run_until(self, t_end: float) -> None:
        """Step while Running until sim time reaches t_end (no-op otherwise)."""
        self._drain_pending()
        while self.phase is Phase.RUNNING and self.sim.time < t_end - 1e-12:
            self.step_once()

    def run_to_end(self) -> None:
        self.run_until(self.scenario.duration)

    # ------------------------------------------------------------------

    def state_hash(self) -> str:
        return self.sim.state_hash()

    def barrier_contact_log(self, barrier_id: str):
        return self.sim.contact_log(barrier_id)

    @classmethod
    def replay(cls, scenario, commands, t_end: float | None = None,
               backend: str = "auto", history_rate: float = 20.0,
               scenario_resolver=None) -> "Session":
        """Rebuild the exact state evolution that produced a command log."""
        commands = list(commands)
        validate_log(commands)
        session = cls(scenario, backend=backend, history_rate=history_rate,
                      scenario_resolver=scenario_resolver)
        for cmd in commands:
            session.run_until(cmd.t)
            session.apply(cmd.type, _seq=cmd.seq, **cmd.payload)
        session.run_until(scenario.duration if t_end is None else t_end)
        return session
