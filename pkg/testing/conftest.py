import sys
from pathlib import Path

import pytest

# Add project root to path
PROJECT_ROOT = str(Path(__file__).parent.parent)
sys.path.insert(0, PROJECT_ROOT)

from cchardy.grid import discretize
from cchardy.nsw import LocalParameters
from cchardy.shapes import EuclideanBall, cube
from cchardy.systems import euclidean, geometry_for


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: lattice solves that take more than a few seconds")


@pytest.fixture(scope="session")
def euclidean_geometry():
    return geometry_for("euclidean3")


@pytest.fixture(scope="session")
def unit_ball():
    """Unit ball of R^3 at h = 1/8 with its boundary distance."""
    return discretize(EuclideanBall((0.0, 0.0, 0.0), 1.0), 0.125, euclidean(3), LocalParameters(1.0, 1.0))


@pytest.fixture(scope="session")
def small_cube():
    return discretize(cube(1.0), 0.25, euclidean(3), LocalParameters(1.0, 1.0))
