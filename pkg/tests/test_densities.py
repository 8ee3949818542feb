"""
Builtin density registry tests.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from densities import BUILTIN_DENSITIES, bimodal, make_density, two_temperature
from density import DensityError, Grid, moment
from sphere import check_tail_bounds


class TestRegistry:
    def test_known_names(self):
        assert {"maxwellian", "bimodal", "uniform_energy", "two_temperature"} <= set(BUILTIN_DENSITIES)

    def test_unknown_name(self, grid):
        with pytest.raises(DensityError):
            make_density("cauchy", grid)

    def test_unknown_parameter(self, grid):
        with pytest.raises(DensityError):
            make_density("bimodal", grid, width=2.0)

    def test_parameters_are_forwarded(self, grid):
        f = make_density("bimodal", grid, mu=1.5)
        assert "mu=1.5" in f.name


class TestUnitEnergyFamilies:
    @pytest.mark.parametrize("name", ["maxwellian", "bimodal", "two_temperature"])
    def test_smooth_builtins_have_unit_energy(self, grid, name):
        f = make_density(name, grid)
        assert abs(f.mass() - 1.0) < 1e-12
        assert abs(moment(f, 2) - 1.0) < 1e-10

    @given(
        mu=st.floats(min_value=0.5, max_value=2.0),
        sigma=st.floats(min_value=0.25, max_value=1.0),
        tail_weight=st.floats(min_value=0.0, max_value=0.3),
    )
    @settings(max_examples=30, deadline=None)
    def test_bimodal_unit_energy_and_declared_tails(self, grid, mu, sigma, tail_weight):
        f = bimodal(mu, sigma, tail_weight, grid)
        assert abs(moment(f, 2) - 1.0) < 1e-9
        check_tail_bounds(f, f.tail_model)

    def test_tail_weight_gives_gaussian_lower_bound(self, grid):
        f = bimodal(tail_weight=0.05, grid=grid)
        assert f.tail_model.a1 < 1.0
        assert bimodal(grid=grid).tail_model.a1 > 1.0

    @given(T1=st.floats(min_value=0.2, max_value=1.5), weight=st.floats(min_value=0.1, max_value=0.6))
    @settings(max_examples=20, deadline=None)
    def test_two_temperature_tails(self, T1, weight):
        grid = Grid(v_max=14.0, n_points=1025)
        f = two_temperature(T1, weight, grid)
        assert abs(moment(f, 2) - 1.0) < 1e-9
        check_tail_bounds(f, f.tail_model)

    def test_two_temperature_without_unit_energy_solution(self, grid):
        with pytest.raises(DensityError):
            two_temperature(T1=3.0, weight=0.5, grid=grid)

    def test_uniform_support(self, uniform_f):
        assert uniform_f.tail_model.support == pytest.approx(np.sqrt(3.0))
        assert np.all(uniform_f.values[np.abs(uniform_f.nodes) > np.sqrt(3.0)] == 0.0)
