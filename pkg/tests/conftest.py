"""Shared fixtures: small grids and quadrature so the fast suite stays fast."""

import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from densities import bimodal, two_temperature, uniform_energy  # noqa: E402
from density import Grid, maxwellian  # noqa: E402
from sphere import SphereResolution  # noqa: E402


@pytest.fixture(scope="session")
def grid():
    return Grid(v_max=8.0, n_points=513)


@pytest.fixture(scope="session")
def coarse_grid():
    return Grid(v_max=8.0, n_points=257)


@pytest.fixture(scope="session")
def resolution():
    return SphereResolution(
        radial_nodes=1024,
        split_nodes=256,
        chi_nodes=512,
        pair_radius_nodes=128,
        theta_nodes=128,
    )


@pytest.fixture(scope="session")
def m1(grid):
    return maxwellian(1.0, grid)


@pytest.fixture(scope="session")
def bimodal_f(grid):
    return bimodal(grid=grid)


@pytest.fixture(scope="session")
def bimodal_tailed(grid):
    return bimodal(tail_weight=0.05, grid=grid)


@pytest.fixture(scope="session")
def uniform_f(grid):
    return uniform_energy(grid)


@pytest.fixture(scope="session")
def two_temp(grid):
    return two_temperature(grid=grid)


@pytest.fixture
def tmp_db(tmp_path, monkeypatch):
    """Point the cache and the run registry at a throwaway SQLite file."""
    import cache
    import database

    path = str(tmp_path / "kaclab.sqlite")
    monkeypatch.setattr(cache, "DB_PATH", path)
    monkeypatch.setattr(database, "DB_PATH", path)
    return path
