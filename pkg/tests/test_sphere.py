"""
Conditioned tensorisation tests.

Exact Maxwellian log-partition values, equilibrium degeneracy, marginal
normalization, table export, log-scalability and the log-power constant.
"""

import inspect

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gammaln

from density import TailModel, maxwellian, moment, relative_entropy
from sphere import (
    INV_SQRT_2PI,
    MissingTableRowError,
    SphereError,
    TailBoundViolation,
    UnitEnergyError,
    c_epsilon,
    c_k_beta,
    check_tail_bounds,
    conditioned_tensor,
    energy_law,
    entropy_HN,
    entropy_production_DN,
    g_concentration_profile,
    log_partition,
    log_partition_fft,
    log_power_constant,
    log_power_integral,
    log_scalability_audit,
    log_scalability_constant,
    marginal,
    marginal_mass,
    marginal_moment,
    profile_weight,
    read_log_z_csv,
    sup_marginal_moment,
    uniform_sphere_points,
    write_log_z_csv,
)
from sphere_oracles import monte_carlo_pair_functional


def maxwellian_log_z(m: int, u: float) -> float:
    """f^{⊗m} of M_1 is constant on every sphere."""
    return -0.5 * m * np.log(2.0 * np.pi) - 0.5 * u


class TestLogPartition:
    @given(
        m=st.integers(min_value=2, max_value=400),
        ratio=st.floats(min_value=0.5, max_value=1.5),
    )
    @settings(max_examples=25, deadline=None)
    def test_maxwellian_closed_form(self, m1, resolution, m, ratio):
        u = ratio * m
        assert log_partition(m1, m, u, resolution) == pytest.approx(maxwellian_log_z(m, u), abs=1e-8 * m)

    def test_rejects_nonpositive_energy(self, m1):
        with pytest.raises(SphereError):
            log_partition(m1, 5, 0.0)

    def test_rejects_single_particle(self, m1):
        with pytest.raises(SphereError):
            log_partition(m1, 1, 1.0)

    def test_fft_cross_check(self, bimodal_f, resolution):
        direct = log_partition(bimodal_f, 50, 50.0, resolution)
        assert log_partition_fft(bimodal_f, 50, 50.0) == pytest.approx(direct, abs=5e-3)

    def test_fft_lattice_default(self):
        assert inspect.signature(log_partition_fft).parameters["n_cells"].default == 2 ** 20

    def test_compact_support_closed_forms(self, uniform_f, resolution):
        c = float(uniform_f.evaluate(np.array([0.0]))[0])
        # S²(√3) lies inside the cube; S³(2) keeps a fraction 2√3/π - 1/3 of its area
        assert log_partition(uniform_f, 3, 3.0, resolution) == pytest.approx(3.0 * np.log(c), abs=1e-9)
        exact = 4.0 * np.log(c) + np.log(2.0 * np.sqrt(3.0) / np.pi - 1.0 / 3.0)
        assert log_partition(uniform_f, 4, 4.0, resolution) == pytest.approx(exact, abs=1e-6)

    def test_pair_partition_is_an_exact_square_fraction(self, uniform_f):
        from sphere import FoldedBase, PairPartition

        c = float(uniform_f.evaluate(np.array([0.0]))[0])
        s = np.sqrt(3.0)
        rho = np.array([1.0, 2.0, 2.3, 2.4])
        inside = 1.0 - 4.0 / np.pi * np.arccos(np.minimum(s / rho, 1.0))
        expected = 2.0 * np.log(c) + np.log(inside)
        np.testing.assert_allclose(PairPartition(FoldedBase(uniform_f), 256)(rho), expected, atol=1e-10)
        assert PairPartition(FoldedBase(uniform_f), 256)(np.array([2.5]))[0] == -np.inf

    def test_energy_law_has_unit_mean(self, bimodal_f):
        law = energy_law(bimodal_f)
        assert law.mass() == pytest.approx(1.0, abs=1e-6)
        assert law.mean() == pytest.approx(1.0, abs=1e-6)


class TestConditionedTensor:
    def test_requires_three_particles(self, m1):
        with pytest.raises(SphereError):
            conditioned_tensor(m1, 2)

    def test_requires_unit_energy(self):
        from density import Grid

        with pytest.raises(UnitEnergyError):
            conditioned_tensor(maxwellian(2.0, Grid(v_max=12.0, n_points=1025)), 10)

    def test_k_max_range(self, m1):
        with pytest.raises(SphereError):
            conditioned_tensor(m1, 5, k_max=4)

    def test_missing_row(self, m1, resolution):
        ct = conditioned_tensor(m1, 10, k_max=2, resolution=resolution)
        with pytest.raises(MissingTableRowError):
            ct.table(5)

    def test_marginal_is_normalized(self, bimodal_f, resolution):
        ct = conditioned_tensor(bimodal_f, 20, resolution=resolution)
        assert marginal_mass(ct) == pytest.approx(1.0, abs=1e-5)
        assert marginal_moment(ct, 2) == pytest.approx(1.0, abs=1e-5)

    def test_marginal_vanishes_outside_sphere(self, bimodal_f, resolution):
        ct = conditioned_tensor(bimodal_f, 10, resolution=resolution)
        assert marginal(ct, 1, np.array([4.0])) == 0.0
        assert marginal(ct, 2, np.array([1.0, -1.0])) > 0.0

    def test_marginal_approaches_base(self, bimodal_f, resolution):
        ct = conditioned_tensor(bimodal_f, 400, resolution=resolution)
        v = np.array([[-0.9], [0.2], [1.1]])
        np.testing.assert_allclose(marginal(ct, 1, v), bimodal_f.evaluate(v[:, 0]), rtol=0.05, atol=1e-3)

    def test_marginal_order_range(self, m1, resolution):
        ct = conditioned_tensor(m1, 10, resolution=resolution)
        with pytest.raises(SphereError):
            marginal(ct, 9, np.zeros(9))


class TestMaxwellianDegeneracy:
    @pytest.mark.parametrize("n", [10, 100])
    def test_entropy_dissipation_and_log_power_vanish(self, m1, resolution, n):
        ct = conditioned_tensor(m1, n, resolution=resolution)
        assert abs(entropy_HN(ct)) <= 1e-6
        assert abs(entropy_production_DN(ct, 0.0)) <= 1e-6
        assert abs(entropy_production_DN(ct, 1.0)) <= 1e-6
        assert abs(log_power_integral(ct, 1.0)) <= 1e-6

    @pytest.mark.slow
    def test_large_n(self, m1):
        ct = conditioned_tensor(m1, 1000)
        assert abs(entropy_HN(ct)) <= 1e-6
        assert abs(entropy_production_DN(ct, 0.5)) <= 1e-6
        assert abs(log_power_integral(ct, 1.0)) <= 1e-6


class TestEntropicChaos:
    def test_entropy_is_positive_off_equilibrium(self, bimodal_f, resolution):
        ct = conditioned_tensor(bimodal_f, 10, resolution=resolution)
        assert entropy_HN(ct) > 0.0
        assert entropy_production_DN(ct, 0.0) > 0.0

    @pytest.mark.slow
    def test_rescaled_entropy_converges(self, bimodal_f, resolution):
        limit = relative_entropy(bimodal_f, maxwellian(1.0, bimodal_f.grid))
        gaps = []
        for n in (10, 100, 1000):
            ct = conditioned_tensor(bimodal_f, n, resolution=resolution)
            gaps.append(abs(entropy_HN(ct) / n - limit))
        assert gaps[0] > gaps[1] > gaps[2]
        assert gaps[2] <= 0.1 * limit

    @pytest.mark.slow
    def test_dissipation_matches_monte_carlo(self, bimodal_f, resolution):
        ct = conditioned_tensor(bimodal_f, 10, resolution=resolution)
        quadrature = entropy_production_DN(ct, 0.0)
        mean, stderr = monte_carlo_pair_functional(bimodal_f, 10, ct.log_z_n, "dissipation", n_samples=400_000)
        assert abs(quadrature - mean) <= 5.0 * stderr + 1e-3 * quadrature


class TestTableExport:
    def test_csv_rebuilds_the_same_state(self, tmp_path, bimodal_f, resolution):
        ct = conditioned_tensor(bimodal_f, 12, resolution=resolution)
        path = write_log_z_csv(ct, tmp_path / "log_z.csv")
        back = read_log_z_csv(path, bimodal_f, 12, resolution)
        assert back.log_z_n == ct.log_z_n
        assert back.k_max == ct.k_max
        assert entropy_HN(back) == pytest.approx(entropy_HN(ct), rel=1e-8)

    def test_missing_n_row(self, tmp_path, bimodal_f, resolution):
        ct = conditioned_tensor(bimodal_f, 12, resolution=resolution)
        path = write_log_z_csv(ct, tmp_path / "log_z.csv")
        with pytest.raises(MissingTableRowError):
            read_log_z_csv(path, bimodal_f, 13, resolution)


class TestCache:
    def test_cached_tables_are_reused(self, tmp_db, bimodal_f, resolution):
        import cache

        first = conditioned_tensor(bimodal_f, 16, resolution=resolution, use_cache=True)
        stored = cache.get_cache_stats()["total_entries"]
        second = conditioned_tensor(bimodal_f, 16, resolution=resolution, use_cache=True)
        assert stored > 0
        assert cache.get_cache_stats()["total_hits"] > 0
        assert second.log_z_n == first.log_z_n

    def test_fresh_entries_survive_expiry_sweep(self, tmp_db, bimodal_f, resolution):
        import cache

        conditioned_tensor(bimodal_f, 16, resolution=resolution, use_cache=True)
        stored = cache.get_cache_stats()["total_entries"]
        assert cache.clear_expired_cache() == 0
        assert cache.get_cache_stats()["total_entries"] == stored


class TestLogScalability:
    def test_tail_violation_is_located(self, m1):
        with pytest.raises(TailBoundViolation) as info:
            check_tail_bounds(m1, TailModel(c1=1.0, a1=0.0, c2=2.0, a2=0.0))
        assert info.value.side == "lower"

    def test_constant_bounds_the_audit(self, bimodal_tailed, resolution):
        ct = conditioned_tensor(bimodal_tailed, 20, resolution=resolution)
        c_f = log_scalability_constant(ct)
        assert c_f > 0
        assert log_scalability_audit(ct, c_f, n_samples=2000) <= c_f

    def test_requires_tail_model(self, grid, resolution):
        from density import from_values

        f = from_values(maxwellian(1.0, grid).values, grid)
        ct = conditioned_tensor(f, 10, resolution=resolution)
        with pytest.raises(SphereError):
            log_scalability_constant(ct)

    def test_sphere_points_lie_on_sphere(self):
        points = uniform_sphere_points(50, 100, np.random.default_rng(3))
        np.testing.assert_allclose(np.sum(points * points, axis=1), 50.0, rtol=1e-12)

    def test_sup_marginal_moment_includes_limit(self, bimodal_f, resolution):
        assert sup_marginal_moment(bimodal_f, 4, (10,), resolution) >= moment(bimodal_f, 4)


class TestLogPowerConstant:
    def test_c_epsilon(self):
        assert c_epsilon(0.5) == pytest.approx(2.0 / np.e, rel=1e-14)
        with pytest.raises(SphereError):
            c_epsilon(0.0)

    def test_c_k_beta_closed_form(self):
        # ∫|cos θ|^6 over a period is 5π/8
        assert c_k_beta(3.0, 1.0) == pytest.approx(80.0 * np.pi, rel=1e-12)
        # ∫|cos θ|^4 over a period is 3π/4
        assert c_k_beta(2.0, 1.0) == pytest.approx(24.0 * np.pi, rel=1e-12)

    def test_rejects_nonpositive_beta(self, bimodal_tailed):
        with pytest.raises(SphereError):
            log_power_constant(bimodal_tailed, 0.0, ratio=1.0)

    def test_moment_form_bounds_measured_integral(self, bimodal_tailed, resolution):
        ct = conditioned_tensor(bimodal_tailed, 50, resolution=resolution)
        c = log_power_constant(bimodal_tailed, 1.0, k=3.0, ratio=1.0, resolution=resolution)
        assert 0 < log_power_integral(ct, 1.0) <= c

    def test_confinement_form_from_tail(self, bimodal_tailed, resolution):
        c = log_power_constant(bimodal_tailed, 1.0, ratio=1.0, resolution=resolution)
        assert np.isfinite(c) and c > 0

    @pytest.mark.parametrize("k", [1, 2])
    def test_profile_weight_is_the_marginal_weight(self, bimodal_f, resolution, k):
        ct = conditioned_tensor(bimodal_f, 20, resolution=resolution)
        s = np.linspace(0.0, 19.5, 50)
        np.testing.assert_allclose(profile_weight(ct, k, s), np.exp(ct.log_weight(k, s)), rtol=1e-10)
        assert profile_weight(ct, k, np.array([20.0, 25.0])).tolist() == [0.0, 0.0]

    def test_maxwellian_profile_scaling(self, m1, resolution):
        n = 20
        profile = g_concentration_profile(m1, ns=(n,), resolution=resolution)
        entry = profile.entries[0]
        assert profile.sigma2 == pytest.approx(2.0, abs=1e-8)
        assert entry.g_at_zero == pytest.approx(INV_SQRT_2PI, rel=1e-14)
        # Σ√N times the chi-squared density of order N at its mean
        log_chi2 = (0.5 * n - 1.0) * np.log(n) - 0.5 * n - 0.5 * n * np.log(2.0) - gammaln(0.5 * n)
        assert entry.profile_at_zero == pytest.approx(np.sqrt(2.0 * n) * np.exp(log_chi2), rel=1e-6)
        assert abs(entry.profile_at_zero / INV_SQRT_2PI - 1.0) <= 1.0 / n

    @pytest.mark.slow
    def test_concentration_profile_tightens(self, bimodal_f, resolution):
        profile = g_concentration_profile(bimodal_f, ns=(20, 80, 320), resolution=resolution)
        assert profile.decreasing
