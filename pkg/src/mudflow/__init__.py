"""Steerable debris-flow simulation over terrain heightfields.

Subsystems:
  terrain      DEM ingestion, resampling, slopes, bilinear queries
  engine       hybrid particle/grid debris-flow solver with boulders
  session      steerable simulation lifecycle, command log, replay
  risk         impact force, landing velocity, vulnerability, risk rasters
  scenario     event/rainfall/climate data layers and scenario files
  physicalize  watertight, tiled, pillar-supported STL terrain export
  server       WebSocket steering service and HTTP data endpoints
"""

from .colliders import Barrier
from .engine import DebrisFlowSim, SimParams
from .terrain import TerrainGrid, load_dem, resample, slope_field

__version__ = "0.1.0"

__all__ = [
    "Barrier",
    "DebrisFlowSim",
    "SimParams",
    "TerrainGrid",
    "load_dem",
    "resample",
    "slope_field",
    "__version__",
]
