import numpy as np
import pytest

from nehari_dp import GridFunction, build_interval_mesh
from nehari_dp.fibering import default_problem


@pytest.fixture(scope="session")
def hat():
    mesh = build_interval_mesh(2)
    return GridFunction(mesh, np.array([0.0, 1.0, 0.0]))


@pytest.fixture(scope="session")
def default_prob():
    return default_problem()


@pytest.fixture(scope="session")
def default_solutions(default_prob):
    from nehari_dp import find_two_solutions

    return find_two_solutions(default_prob)
