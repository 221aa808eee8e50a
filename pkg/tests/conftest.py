import pytest

from blab.dyadic import GridConfig, TentCache, build_grid


@pytest.fixture(scope="session")
def grid_n1():
    return build_grid(GridConfig(dim=1, theta0=1.0, depth=5, systems=2, seed=7))


@pytest.fixture(scope="session")
def cache_n1(grid_n1):
    return TentCache(grid_n1)


@pytest.fixture(scope="session")
def grid_n2():
    return build_grid(GridConfig(dim=2, theta0=0.6, depth=3, systems=4, seed=11))


@pytest.fixture(scope="session")
def cache_n2(grid_n2):
    return TentCache(grid_n2)
