"""
Kac-Boltzmann solver property tests: fixed points, conservation, the H-theorem
and the closed fourth-moment evolution at γ = 0.
"""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boltzmann import (
    BoltzmannTrajectory,
    CacheMismatchError,
    EntropyIncreaseError,
    SolverConfig,
    SolverError,
    build_kernel_cache,
    calibrate_dissipation_prefactor,
    collision_Q,
    entropy_dissipation_rate,
    entropy_production_Dgamma,
    entropy_production_Dgamma_estimate,
    lagrange_stencils,
    m4_oracle,
    moment_envelope,
    moments_bounded,
    pinsker_audit,
    restore_invariants,
    solve,
    write_trajectory,
    bin_masses,
)
from densities import bimodal, two_temperature
from density import DensityError, maxwellian, moment

gamma_strategy = st.sampled_from([0.0, 0.5, 1.0])


@pytest.fixture(scope="module")
def small_m1(coarse_grid):
    return maxwellian(1.0, coarse_grid)


@pytest.fixture(scope="module")
def small_bimodal(coarse_grid):
    return bimodal(grid=coarse_grid)


@pytest.fixture(scope="module")
def cache_gamma0(coarse_grid):
    return build_kernel_cache(coarse_grid, 0.0, theta_nodes=128)


@pytest.fixture(scope="module")
def trajectory_gamma0(small_bimodal, cache_gamma0):
    config = SolverConfig(t_end=1.0, gamma=0.0, theta_nodes=128, dissipation=False,
                          sample_times=[0.0, 0.25, 0.5, 0.75, 1.0])
    return solve(small_bimodal, config, cache_gamma0)


class TestStencils:
    @given(x=st.floats(min_value=-4.0, max_value=4.0, allow_nan=False))
    @settings(max_examples=100, deadline=None)
    def test_weights_partition_unity(self, x):
        _, weights, inside = lagrange_stencils(np.array([x]), -4.0, 0.125, 65)
        assert inside[0]
        assert weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_reproduces_cubics(self):
        nodes = -2.0 + 0.25 * np.arange(17)
        x = np.array([-1.9, -0.33, 0.0, 1.27, 1.99])
        base, weights, _ = lagrange_stencils(x, -2.0, 0.25, 17)
        cubic = lambda t: t ** 3 - 2 * t + 0.5
        values = np.sum(weights * cubic(nodes[base[:, None] + np.arange(4)]), axis=1)
        np.testing.assert_allclose(values, cubic(x), rtol=1e-12, atol=1e-12)

    def test_outside_points_are_masked(self):
        _, _, inside = lagrange_stencils(np.array([-5.0, 5.0]), -4.0, 0.125, 65)
        assert not inside.any()

    def test_needs_four_nodes(self):
        with pytest.raises(SolverError):
            lagrange_stencils(np.zeros(1), 0.0, 1.0, 3)


class TestKernelCache:
    def test_theta_nodes_validated(self, coarse_grid):
        with pytest.raises(SolverError):
            build_kernel_cache(coarse_grid, 0.0, theta_nodes=62)
        with pytest.raises(SolverError):
            build_kernel_cache(coarse_grid, 0.0, theta_nodes=32)

    def test_gamma_validated(self, coarse_grid):
        with pytest.raises(SolverError):
            build_kernel_cache(coarse_grid, 1.5)

    def test_mismatch_detected(self, small_bimodal, cache_gamma0):
        with pytest.raises(CacheMismatchError):
            collision_Q(small_bimodal, 0.5, cache_gamma0)
        with pytest.raises(CacheMismatchError):
            collision_Q(maxwellian(1.0), 0.0, cache_gamma0)


class TestCollisionOperator:
    @given(gamma=gamma_strategy)
    @settings(max_examples=3, deadline=None)
    def test_maxwellian_is_fixed_point(self, small_m1, gamma):
        cache = build_kernel_cache(small_m1.grid, gamma, theta_nodes=128)
        q = collision_Q(small_m1, gamma, cache, correct=False)
        assert small_m1.integrate(np.abs(q)) <= 1e-6

    @given(gamma=gamma_strategy)
    @settings(max_examples=3, deadline=None)
    def test_projection_conserves_mass_and_energy(self, small_bimodal, gamma):
        cache = build_kernel_cache(small_bimodal.grid, gamma, theta_nodes=128)
        q = collision_Q(small_bimodal, gamma, cache)
        w, v2 = cache.trapezoid_weights, small_bimodal.nodes ** 2
        assert abs(np.sum(w * q)) < 1e-12
        assert abs(np.sum(w * v2 * q)) < 1e-12

    def test_raw_operator_nearly_conservative(self, small_bimodal, cache_gamma0):
        q = collision_Q(small_bimodal, 0.0, cache_gamma0, correct=False)
        assert abs(small_bimodal.integrate(q)) < 1e-3
        assert abs(small_bimodal.integrate(small_bimodal.nodes ** 2 * q)) < 1e-3

    def test_fourth_moment_rate(self, small_bimodal, cache_gamma0):
        q = collision_Q(small_bimodal, 0.0, cache_gamma0)
        rate = small_bimodal.integrate(small_bimodal.nodes ** 4 * q)
        assert rate == pytest.approx(-0.5 * (moment(small_bimodal, 4) - 3.0), rel=1e-3)

    def test_restore_invariants(self, small_bimodal, cache_gamma0):
        values = restore_invariants(1.01 * small_bimodal.values, cache_gamma0)
        w, v2 = cache_gamma0.trapezoid_weights, small_bimodal.nodes ** 2
        assert np.sum(w * values) == pytest.approx(1.0, abs=1e-14)
        assert np.sum(w * v2 * values) == pytest.approx(1.0, abs=1e-14)


class TestDissipation:
    def test_vanishes_at_equilibrium(self, m1):
        assert abs(entropy_production_Dgamma(m1, 0.5)) < 1e-10

    def test_rejects_bad_gamma(self, m1):
        with pytest.raises(SolverError):
            entropy_production_Dgamma(m1, -0.1)

    def test_positive_and_monotone_in_gamma(self, bimodal_f):
        values = [entropy_production_Dgamma(bimodal_f, g, 128, 128) for g in (0.0, 0.5, 1.0)]
        assert 0 < values[0] <= values[1] <= values[2]

    def test_estimate_reports_reliability(self, bimodal_f):
        estimate = entropy_production_Dgamma_estimate(bimodal_f, 0.0, 128, 128)
        assert estimate.error < 1e-2 * estimate.value
        assert estimate.to_dict()["value"] == estimate.value

    def test_matches_grid_rate(self, small_bimodal, cache_gamma0):
        grid_rate = entropy_dissipation_rate(small_bimodal, 0.0, cache_gamma0)
        assert entropy_production_Dgamma(small_bimodal, 0.0) == pytest.approx(grid_rate, rel=2e-2)


class TestSolver:
    def test_requires_unit_energy(self):
        from density import Grid

        f = maxwellian(2.0, Grid(v_max=12.0, n_points=257))
        with pytest.raises(DensityError):
            solve(f, SolverConfig(t_end=0.1, theta_nodes=64, dissipation=False))

    def test_config_validation(self):
        with pytest.raises(SolverError):
            SolverConfig(t_end=0.0)
        with pytest.raises(SolverError):
            SolverConfig(correction="clip")
        with pytest.raises(SolverError):
            SolverConfig(sample_times=[2.0], t_end=1.0).times()

    def test_mass_and_energy_conserved(self, trajectory_gamma0):
        np.testing.assert_allclose(trajectory_gamma0.mass, 1.0, atol=1e-10)
        np.testing.assert_allclose(trajectory_gamma0.energy, 1.0, atol=1e-10)

    def test_entropy_non_increasing(self, trajectory_gamma0):
        h = np.asarray(trajectory_gamma0.step_H)
        assert np.all(np.diff(h) <= 1e-10)
        assert trajectory_gamma0.entropy_violations == []

    def test_fourth_moment_oracle(self, trajectory_gamma0):
        expected = m4_oracle(trajectory_gamma0.m4[0], trajectory_gamma0.times)
        np.testing.assert_allclose(trajectory_gamma0.m4, expected, rtol=1e-4)

    def test_moments_stay_bounded(self, trajectory_gamma0):
        assert moments_bounded(trajectory_gamma0, orders=(4,)) == {4: True}

    def test_moment_growth_is_flagged(self, small_bimodal, coarse_grid):
        heated = two_temperature(0.2, 0.5, coarse_grid)
        trajectory = BoltzmannTrajectory(gamma=0.0, dt=0.1, densities=[small_bimodal, heated, small_bimodal])
        envelope = moment_envelope(trajectory, orders=(4,))[4]
        assert envelope[1] == envelope[2] == pytest.approx(moment(heated, 4))
        assert envelope[0] < envelope[1]
        assert moments_bounded(trajectory, orders=(4,)) == {4: False}

    def test_pinsker_along_trajectory(self, trajectory_gamma0):
        assert all(row["holds"] for row in pinsker_audit(trajectory_gamma0))

    def test_samples_on_schedule(self, trajectory_gamma0):
        assert trajectory_gamma0.times == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert trajectory_gamma0.density_at(0.49) is trajectory_gamma0.densities[2]

    def test_strict_mode_raises_on_entropy_increase(self, small_bimodal, cache_gamma0):
        config = SolverConfig(t_end=0.05, theta_nodes=128, dissipation=False, h_slack=-1.0)
        with pytest.raises(EntropyIncreaseError) as info:
            solve(small_bimodal, config, cache_gamma0)
        assert info.value.step == 1

    def test_lenient_mode_records_violations(self, small_bimodal, cache_gamma0):
        config = SolverConfig(t_end=0.05, theta_nodes=128, dissipation=False, h_slack=-1.0, strict=False)
        trajectory = solve(small_bimodal, config, cache_gamma0)
        assert len(trajectory.entropy_violations) == len(trajectory.step_times) - 1

    def test_reproducible(self, small_bimodal, cache_gamma0):
        config = SolverConfig(t_end=0.1, theta_nodes=128, dissipation=False)
        a = solve(small_bimodal, config, cache_gamma0)
        b = solve(small_bimodal, config, cache_gamma0)
        assert all(np.array_equal(x.values, y.values) for x, y in zip(a.densities, b.densities))

    def test_write_trajectory(self, tmp_path, trajectory_gamma0):
        path = write_trajectory(trajectory_gamma0, tmp_path)
        series = json.loads(path.read_text())
        assert series["t"] == trajectory_gamma0.times
        assert (tmp_path / "density_004.csv").exists()

    @pytest.mark.slow
    def test_hard_spheres_relax(self, small_bimodal):
        config = SolverConfig(t_end=2.0, gamma=1.0, theta_nodes=128, dissipation=False)
        trajectory = solve(small_bimodal, config)
        assert np.all(np.diff(trajectory.H) < 0.0)
        np.testing.assert_allclose(trajectory.energy, 1.0, atol=1e-10)


class TestCalibration:
    @pytest.mark.slow
    def test_prefactor_matches_finite_difference(self, small_bimodal):
        config = SolverConfig(t_end=1.0, gamma=0.0, theta_nodes=128, sample_times=[0.0, 0.25, 0.5, 0.75, 1.0])
        trajectory = solve(small_bimodal, config)
        result = calibrate_dissipation_prefactor(trajectory)
        assert result.relative_error <= 1e-2

    def test_needs_three_samples(self, small_bimodal, cache_gamma0):
        config = SolverConfig(t_end=0.05, theta_nodes=128, dissipation=False, sample_times=[0.0, 0.05])
        trajectory = solve(small_bimodal, config, cache_gamma0)
        with pytest.raises(SolverError):
            calibrate_dissipation_prefactor(trajectory)


class TestBinMasses:
    def test_maxwellian_bins(self, m1):
        edges = np.linspace(-6.0, 6.0, 49)
        masses = bin_masses(m1, edges)
        assert masses.sum() == pytest.approx(1.0, abs=1e-8)
        assert masses[24] == pytest.approx(masses[23], rel=1e-10)
