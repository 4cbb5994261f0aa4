import numpy as np
import pytest

from fioprop.grid import SpaceGrid
from fioprop.potential import make_scaled_bump, zero_potential


@pytest.fixture(scope="session")
def bump():
    return make_scaled_bump(0.5)


@pytest.fixture(scope="session")
def weak_bump():
    return make_scaled_bump(0.5, amplitude=0.25)


@pytest.fixture(scope="session")
def free():
    return zero_potential()


@pytest.fixture(scope="session")
def small_grid():
    return SpaceGrid(64, 20.0)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
