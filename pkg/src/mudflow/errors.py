"""Exception hierarchy shared across the package."""


class MudflowError(Exception):
    """Base class for everything this package raises on purpose."""


class DemParseError(MudflowError, ValueError):
    """Malformed ESRI ASCII grid; message names the offending line."""


class DomainError(MudflowError, ValueError):
    """Query or argument outside its valid domain."""


class AlignmentError(MudflowError, ValueError):
    """Two rasters that must share extent and cell size do not."""


class ScenarioError(MudflowError, ValueError):
    """Scenario file missing, inconsistent, or references bad data."""


class ConfigError(MudflowError, ValueError):
    """Bad CLI/server configuration (maps to exit code 2)."""


class CflError(MudflowError, RuntimeError):
    """Particle speed violates the CFL bound for the configured dt."""


class DivergenceError(MudflowError, RuntimeError):
    """Non-finite particle state detected; message names the particle."""


class PhaseError(MudflowError, RuntimeError):
    """Steering command illegal in the session's current phase."""

    def __init__(self, command: str, phase: str):
        super().__init__(f"command {command!r} not allowed in phase {phase}")
        self.command = command
        self.phase = phase


class UnknownBarrierError(MudflowError, ValueError):
    """Command or query references a barrier id that is not registered."""

    def __init__(self, barrier_id: str):
        super().__init__(f"unknown barrier {barrier_id!r}")
        self.barrier_id = barrier_id


class CommandLogError(MudflowError, ValueError):
    """Replay log has a sequence gap, duplicate, or malformed entry."""


class MeshError(MudflowError, ValueError):
    """Solid mesh failed a watertightness or fabrication constraint."""
