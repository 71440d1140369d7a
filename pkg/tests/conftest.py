import numpy as np
import pytest

from mudflow.engine import DebrisFlowSim, SimParams
from mudflow.terrain import TerrainGrid


def flat_terrain(n=20, cell=1.0, height=0.0):
    return TerrainGrid(n_cols=n, n_rows=n, cell_size=cell, origin_x=0.0, origin_y=0.0,
                       heights=np.full((n, n), float(height)))


def small_sim(n=20, cell=1.0, dt=1e-3, height=0.0, **params):
    terrain = flat_terrain(n, cell, height)
    return DebrisFlowSim(terrain, SimParams(dt=dt, **params), headroom=12.0, seed=7)


@pytest.fixture
def terrain_flat():
    return flat_terrain()


@pytest.fixture(scope="session")
def v_channel_short():
    """Short-duration channel scenario shared by slower tests."""
    from mudflow import fixtures
    return fixtures.v_channel_scenario(volume=150.0, duration=4.0)
