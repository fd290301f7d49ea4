import numpy as np
import pytest

from graspmap.mesh import TriangleMesh
from graspmap.shapes import icosphere, planar_grid


@pytest.fixture(scope="session")
def sphere2():
    return icosphere(2)


@pytest.fixture(scope="session")
def sphere3():
    return icosphere(3)


@pytest.fixture(scope="session")
def grid16():
    return planar_grid(16)


@pytest.fixture
def single_triangle():
    return TriangleMesh(
        np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]),
        np.array([[0, 1, 2]]),
    )


def write_obj(path, text):
    path.write_text(text)
    return str(path)
