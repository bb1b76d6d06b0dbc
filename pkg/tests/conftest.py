import numpy as np
import pytest

from sdfem import (StabilizationConfig, assemble_system, build_mesh,
                   make_problem, transition_params)


@pytest.fixture(scope="session")
def mesh24():
    return build_mesh(24, transition_params(1e-4, 1.0, 24))


@pytest.fixture(scope="session")
def problem24():
    return make_problem("constant-f", 1e-4)


@pytest.fixture(scope="session")
def config():
    return StabilizationConfig(0.25)


@pytest.fixture(scope="session")
def system24(mesh24, problem24, config):
    return assemble_system(mesh24, problem24, config)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def center_star(mesh):
    """Interior node nearest the domain center."""
    i = int(np.argmin(np.abs(mesh.x_coords - 0.5)))
    j = int(np.argmin(np.abs(mesh.y_coords - 0.5)))
    return i, j
