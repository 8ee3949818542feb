"""
Kac Walk tests: sphere invariance, event rates, thinning, reproducibility
and the closed fourth-moment evolution at γ = 0.
"""

import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boltzmann import SolverConfig, solve
from densities import bimodal
from density import maxwellian
from kac_walk import (
    EventSource,
    ParticleState,
    ScheduleMismatchError,
    TrajectoryRecord,
    WalkConfig,
    WalkError,
    collision_rotate,
    make_rng,
    metropolis_sphere,
    next_event,
    pair_selection_probability,
    pooled_histograms,
    propagation_of_chaos_check,
    run_ensemble,
    run_walk,
    sample_chaotic_initial,
    simulate,
    step_gillespie,
    total_rate,
    walk_m4_oracle,
    write_record,
)


class TestInitialData:
    @given(n=st.integers(min_value=2, max_value=500), seed=st.integers(min_value=0, max_value=1000))
    @settings(max_examples=30, deadline=None)
    def test_lands_on_the_sphere(self, bimodal_f, n, seed):
        state = sample_chaotic_initial(bimodal_f, n, make_rng(seed))
        assert state.recompute_energy() == pytest.approx(n, rel=1e-12)
        assert state.energy_cache == pytest.approx(n, rel=1e-12)

    def test_rejects_non_unit_energy(self):
        from density import Grid

        with pytest.raises(WalkError):
            sample_chaotic_initial(maxwellian(2.0, Grid(v_max=12.0, n_points=1025)), 10, make_rng(0))

    def test_rejects_single_particle(self, m1):
        with pytest.raises(WalkError):
            sample_chaotic_initial(m1, 1, make_rng(0))


class TestCollision:
    @given(theta=st.floats(min_value=-np.pi, max_value=np.pi))
    @settings(max_examples=50, deadline=None)
    def test_rotation_preserves_pair_energy(self, theta):
        state = ParticleState.from_velocities([1.5, -0.5, 0.2])
        collision_rotate(state, 0, 1, theta)
        assert state.velocities[0] ** 2 + state.velocities[1] ** 2 == pytest.approx(2.5, rel=1e-14)
        assert state.velocities[2] == 0.2
        assert state.last_pair == (0, 1)

    def test_same_particle_rejected(self):
        state = ParticleState.from_velocities([1.0, 1.0])
        with pytest.raises(WalkError):
            collision_rotate(state, 1, 1, 0.3)

    def test_step_validates_gamma(self, bimodal_f):
        state = sample_chaotic_initial(bimodal_f, 10, make_rng(0))
        with pytest.raises(WalkError):
            step_gillespie(state, 1.5, make_rng(1))

    def test_step_advances_time(self, bimodal_f):
        state = sample_chaotic_initial(bimodal_f, 10, make_rng(0))
        state, dt = step_gillespie(state, 0.5, make_rng(1))
        assert dt > 0
        assert state.last_pair is not None


class TestWalkConfig:
    def test_validation(self):
        with pytest.raises(WalkError):
            WalkConfig(n=1)
        with pytest.raises(WalkError):
            WalkConfig(n=10, gamma=-0.1)
        with pytest.raises(WalkError):
            WalkConfig(n=10, t_end=1.0, sample_times=[0.0, 2.0])
        with pytest.raises(WalkError):
            WalkConfig(n=10, renormalize_every=0)

    def test_default_schedule(self):
        config = WalkConfig(n=10, t_end=2.0)
        np.testing.assert_allclose(config.times(), [0.0, 0.4, 0.8, 1.2, 1.6, 2.0])
        assert config.edges().size == config.bins + 1


class TestSimulation:
    def test_energy_drift_is_roundoff(self, bimodal_f):
        config = WalkConfig(n=100, gamma=1.0, t_end=5.0, seed=4)
        state = sample_chaotic_initial(bimodal_f, 100, make_rng(config.seed))
        record = simulate(state, config, make_rng(5))
        assert abs(state.recompute_energy() - 100.0) <= 1e-9 * 100.0
        np.testing.assert_allclose(record.m2, 1.0, atol=1e-10)

    def test_renormalization(self, bimodal_f):
        config = WalkConfig(n=50, t_end=2.0, renormalize_every=10)
        record = run_walk(config, bimodal_f)
        np.testing.assert_allclose(record.m2, 1.0, atol=1e-13)

    def test_event_rate_at_gamma_zero(self, bimodal_f):
        n, t_end = 50, 20.0
        record = run_walk(WalkConfig(n=n, t_end=t_end, seed=7), bimodal_f)
        expected = n * t_end
        assert abs(record.event_count - expected) <= 5.0 * np.sqrt(expected)

    def test_thinned_waiting_time(self, bimodal_f):
        state = sample_chaotic_initial(bimodal_f, 20, make_rng(2))
        source = EventSource(make_rng(3), state.n)
        waits = [next_event(state, 1.0, source)[0] for _ in range(20_000)]
        assert np.mean(waits) == pytest.approx(1.0 / total_rate(state.velocities, 1.0), rel=0.05)
        assert state.accepted <= state.proposals

    def test_same_seed_same_trajectory(self, bimodal_f):
        config = WalkConfig(n=30, gamma=0.5, t_end=3.0, seed=11)
        a, b = run_walk(config, bimodal_f), run_walk(config, bimodal_f)
        assert a.event_count == b.event_count
        assert a.m4 == b.m4
        assert all(np.array_equal(x, y) for x, y in zip(a.histograms, b.histograms))

    def test_momentum_is_recorded(self, bimodal_f):
        record = run_walk(WalkConfig(n=30, t_end=1.0), bimodal_f)
        assert len(record.momentum) == len(record.times) == 6

    def test_fourth_moment_oracle(self, bimodal_f):
        n, times = 20, [0.0, 0.5, 1.0, 2.0]
        config = WalkConfig(n=n, t_end=2.0, sample_times=times, seed=21)
        records = run_ensemble(config, bimodal_f, size=400, workers=1)
        residuals = np.array([
            np.asarray(r.m4) - walk_m4_oracle(r.m4[0], n, times) for r in records
        ])
        mean = residuals.mean(axis=0)
        stderr = residuals.std(axis=0, ddof=1) / np.sqrt(len(records))
        assert np.all(np.abs(mean[1:]) <= 5.0 * stderr[1:] + 1e-3)

    def test_oracle_equilibrium(self):
        assert walk_m4_oracle(1.0, 10, [1e6])[0] == pytest.approx(30.0 / 12.0)


class TestEnsemble:
    def test_results_do_not_depend_on_workers(self, bimodal_f):
        config = WalkConfig(n=20, t_end=1.0, seed=3)
        serial = run_ensemble(config, bimodal_f, size=3, workers=1)
        parallel = run_ensemble(config, bimodal_f, size=3, workers=2)
        assert [r.m4 for r in serial] == [r.m4 for r in parallel]

    def test_members_differ(self, bimodal_f):
        records = run_ensemble(WalkConfig(n=20, t_end=1.0), bimodal_f, size=2, workers=1)
        assert records[0].m4 != records[1].m4

    def test_rejects_empty_ensemble(self, bimodal_f):
        with pytest.raises(WalkError):
            run_ensemble(WalkConfig(n=20), bimodal_f, size=0)

    def test_schedule_mismatch(self):
        edges = np.linspace(-1.0, 1.0, 3)
        a = TrajectoryRecord(times=[0.0, 1.0], edges=edges, histograms=[np.zeros(2)] * 2)
        b = TrajectoryRecord(times=[0.0, 0.5], edges=edges, histograms=[np.zeros(2)] * 2)
        with pytest.raises(ScheduleMismatchError):
            pooled_histograms([a, b])


class TestPairSelection:
    @pytest.mark.parametrize("n", [3, 10, 100])
    def test_hard_sphere_concentrated_state(self, n):
        v = np.zeros(n)
        v[0] = np.sqrt(n)
        assert pair_selection_probability(v, 0, 1.0) == pytest.approx(2.0 * (n + 1) / (3.0 * n), rel=1e-12)

    def test_maxwellian_molecules_are_uniform(self):
        v = np.array([2.0, 0.5, -1.0, 0.1])
        assert pair_selection_probability(v, 0, 0.0) == pytest.approx(0.5, rel=1e-12)
        assert total_rate(v, 0.0) == pytest.approx(4.0, rel=1e-12)


class TestMetropolis:
    def test_maxwellian_target_accepts_every_rotation(self, m1):
        state, acceptance = metropolis_sphere(m1, 20, 2000, make_rng(8))
        assert acceptance > 0.99
        assert state.recompute_energy() == pytest.approx(20.0, rel=1e-10)

    def test_bimodal_target_stays_on_sphere(self, bimodal_f):
        state, acceptance = metropolis_sphere(bimodal_f, 20, 2000, make_rng(9))
        assert 0.0 < acceptance < 1.0
        assert state.recompute_energy() == pytest.approx(20.0, rel=1e-10)


class TestExport:
    def test_write_record(self, tmp_path, bimodal_f):
        record = run_walk(WalkConfig(n=20, t_end=1.0, bins=8), bimodal_f)
        meta = json.loads(write_record(record, tmp_path, prefix="w").read_text())
        assert meta["event_count"] == record.event_count
        assert meta["config"]["n"] == 20
        lines = (tmp_path / "w_histograms.csv").read_text().splitlines()
        assert len(lines) == 1 + 6 * 8


@pytest.mark.slow
class TestPropagationOfChaos:
    def test_walk_marginal_tracks_solver(self, coarse_grid):
        f0 = bimodal(grid=coarse_grid)
        times = [0.0, 0.5, 1.0]
        config = WalkConfig(n=200, t_end=1.0, sample_times=times, bins=16, bin_range=4.0, seed=5)
        records = run_ensemble(config, f0, size=20, workers=1)
        trajectory = solve(f0, SolverConfig(t_end=1.0, theta_nodes=128, dissipation=False, sample_times=times))
        check = propagation_of_chaos_check(records, trajectory)
        assert len(check.rows()) == 3
        for distance, error in zip(check.distances, check.errors):
            assert distance <= 3.0 * error + 0.02

    def test_schedule_must_match_solver(self, coarse_grid):
        f0 = bimodal(grid=coarse_grid)
        records = run_ensemble(WalkConfig(n=20, t_end=1.0, sample_times=[0.0, 1.0]), f0, size=2, workers=1)
        trajectory = solve(f0, SolverConfig(t_end=1.0, theta_nodes=64, dissipation=False, sample_times=[0.0, 0.5, 1.0]))
        with pytest.raises(ScheduleMismatchError):
            propagation_of_chaos_check(records, trajectory)
