import numpy as np
import pytest

from sbmrom.embedded import CircleGeometry, classify
from sbmrom.mesh import TriMesh, generate_channel_mesh


@pytest.fixture(scope="session")
def coarse_mesh():
    # 30 x 6 cells over the channel, 1281 dofs
    return generate_channel_mesh((-1.5, 1.5), (-0.3, 0.3), 0.1)


@pytest.fixture(scope="session")
def medium_mesh():
    return generate_channel_mesh((-1.5, 1.5), (-0.3, 0.3), 0.05)


@pytest.fixture(scope="session")
def fine_mesh():
    return generate_channel_mesh((-1.5, 1.5), (-0.3, 0.3), 0.02)


@pytest.fixture(scope="session")
def medium_cylinder(medium_mesh):
    g = CircleGeometry(0.0, 0.15)
    return g, classify(medium_mesh, g)


@pytest.fixture
def unit_triangle():
    return TriMesh(
        np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]),
        np.array([[0, 1, 2]]),
        np.array([[0, 1], [1, 2], [2, 0]]),
        np.array(["Bottom", "Right", "Left"]),
    )
