"""
Cross-checks of the log-partition construction against brute-force sphere
quadrature at N = 3 and N = 4, and Monte Carlo over S^{N-1}(√N).
"""

import numpy as np
import pytest

from sphere import (
    conditioned_tensor,
    entropy_HN,
    log_partition,
    log_power_integral,
    marginal_moment,
)
from sphere_oracles import (
    _panels,
    _s2_nodes,
    entropy_n3,
    first_marginal_expectation_n3,
    log_partition_n3,
    log_partition_n4,
    monte_carlo_pair_functional,
)

TOLERANCE = 1e-6


class TestSphereNodes:
    def test_weights_are_a_probability(self):
        points, weights = _s2_nodes(2.0, 32, 64)
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(np.linalg.norm(points, axis=1), 2.0, rtol=1e-12)

    @pytest.mark.parametrize("smooth", [True, False])
    def test_panels_integrate_polynomials(self, smooth):
        nodes, weights = _panels(np.array([0.0, 0.5, 2.0]), 16, smooth=smooth)
        assert weights.sum() == pytest.approx(2.0, rel=1e-12)
        assert np.sum(weights * nodes ** 2) == pytest.approx(8.0 / 3.0, rel=1e-12)

    def test_unknown_pair_functional(self, m1):
        with pytest.raises(ValueError):
            monte_carlo_pair_functional(m1, 5, 0.0, kind="fisher", n_samples=10)


@pytest.mark.slow
class TestPartitionOracles:
    @pytest.mark.parametrize("name", ["m1", "bimodal_f", "uniform_f"])
    def test_three_particles(self, request, name):
        f = request.getfixturevalue(name)
        direct = log_partition(f, 3, 3.0)
        oracle = log_partition_n3(f, 3.0)
        assert abs(np.expm1(direct - oracle)) <= TOLERANCE

    @pytest.mark.parametrize("name", ["m1", "bimodal_f", "uniform_f"])
    def test_four_particles(self, request, name):
        f = request.getfixturevalue(name)
        direct = log_partition(f, 4, 4.0)
        oracle = log_partition_n4(f, 4.0)
        assert abs(np.expm1(direct - oracle)) <= TOLERANCE

    def test_four_particle_oracle_matches_cube_fraction(self, uniform_f):
        # the part of S³(2) inside [-√3, √3]⁴ has relative measure 2√3/π - 1/3
        c = float(uniform_f.evaluate(np.array([0.0]))[0])
        exact = 4.0 * np.log(c) + np.log(2.0 * np.sqrt(3.0) / np.pi - 1.0 / 3.0)
        assert abs(np.expm1(log_partition_n4(uniform_f, 4.0) - exact)) <= TOLERANCE


@pytest.mark.slow
class TestFunctionalOracles:
    def test_entropy_three_particles(self, bimodal_f):
        ct = conditioned_tensor(bimodal_f, 3, k_max=1)
        assert entropy_HN(ct) == pytest.approx(entropy_n3(bimodal_f), rel=1e-5)

    def test_marginal_moment_three_particles(self, bimodal_f):
        ct = conditioned_tensor(bimodal_f, 3, k_max=1)
        oracle = first_marginal_expectation_n3(bimodal_f, lambda v: v ** 4)
        assert marginal_moment(ct, 4) == pytest.approx(oracle, rel=1e-5)

    def test_log_power_integral_monte_carlo(self, bimodal_f, resolution):
        ct = conditioned_tensor(bimodal_f, 8, resolution=resolution)
        mean, stderr = monte_carlo_pair_functional(
            bimodal_f, 8, ct.log_z_n, "log_power", beta=1.0, n_samples=400_000, seed=11
        )
        assert abs(log_power_integral(ct, 1.0) - mean) <= 5.0 * stderr + 1e-3 * mean
