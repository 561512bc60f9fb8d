import pytest

from ppifem.mesh import build_mesh
from ppifem.problems import example1, example2


@pytest.fixture(scope="session")
def example1_problem():
    return example1.problem((10.0, 1.0, 100.0))


@pytest.fixture(scope="session")
def example2_problem():
    return example2.problem((10.0, 1.0, 100.0))


@pytest.fixture(scope="session")
def example1_mesh16(example1_problem):
    return build_mesh(example1_problem.domain, 16, example1_problem.geom)


@pytest.fixture(scope="session")
def example2_mesh16(example2_problem):
    return build_mesh(example2_problem.domain, 16, example2_problem.geom)
