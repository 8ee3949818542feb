"""
Inequality certifier tests: closed-form constants, verdicts on builtin
families, decay envelopes and the report bundle.
"""

import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boltzmann import SolverConfig, solve
from certifier import (
    HypothesisError,
    MomentMode,
    TheoremReport,
    Verdict,
    any_hard_failure,
    bracket_constants,
    certify_thm13,
    certify_thm13_along,
    certify_thm22,
    certify_thm23,
    certify_transfer_thm41,
    certify_villani,
    constant_thm22i,
    constant_thm23i,
    decay_envelope_thm24,
    decay_timescales,
    envelope_half_time,
    epsilon_thm23,
    render_table,
    villani_envelope,
    write_report_bundle,
)
from densities import bimodal
from density import from_values
from sphere import PROFILE_NS, conditioned_tensor, entropy_HN, entropy_production_DN

SMALL_NS = (10, 20)

k_strategy = st.floats(min_value=1.5, max_value=6.0)
gamma_strategy = st.floats(min_value=0.0, max_value=0.95)


@pytest.fixture(scope="module")
def ct_tailed(bimodal_tailed, resolution):
    return conditioned_tensor(bimodal_tailed, 20, resolution=resolution)


@pytest.fixture(scope="module")
def ct_bimodal(bimodal_f, resolution):
    return conditioned_tensor(bimodal_f, 20, resolution=resolution)


class TestConstants:
    def test_golden_value(self):
        assert constant_thm22i(2.0, 0.0, 100, 1.0, 3.0) == pytest.approx(1.0 / 453600.0, rel=1e-12)

    @given(k=k_strategy, gamma=gamma_strategy, n=st.integers(min_value=3, max_value=10_000))
    @settings(max_examples=50, deadline=None)
    def test_doubling_n(self, k, gamma, n):
        ratio = constant_thm22i(k, gamma, 2 * n, 1.5, 4.0) / constant_thm22i(k, gamma, n, 1.5, 4.0)
        assert ratio == pytest.approx(2.0 ** ((gamma - 1.0) / (k - 1.0)), rel=1e-10)

    @pytest.mark.parametrize("k", [2.0, 3.0, 5.0])
    def test_hard_sphere_limit(self, k):
        assert constant_thm22i(k, 1.0 - 1e-9, 100, 2.0, 15.0) == pytest.approx(1.0 / 3.0, rel=1e-6)
        assert constant_thm22i(k, 0.999, 100, 2.0, 15.0) < 1.0 / 3.0

    def test_rejections(self):
        with pytest.raises(HypothesisError):
            constant_thm22i(1.0, 0.0, 10, 1.0, 3.0)
        with pytest.raises(HypothesisError):
            constant_thm22i(3.0, 1.0, 10, 1.0, 3.0)
        with pytest.raises(HypothesisError):
            constant_thm22i(3.0, 0.0, 10, 0.0, 3.0)

    def test_epsilon(self):
        assert epsilon_thm23(3.0, 1.0, 0.0) == pytest.approx(2.0)
        assert epsilon_thm23(3.0, 1e8, 0.5) == pytest.approx(0.5 / 2.0, rel=1e-6)
        with pytest.raises(HypothesisError):
            epsilon_thm23(2.0, 1.0, 0.0)

    def test_log_power_constant_rejects_small_k(self):
        with pytest.raises(HypothesisError):
            constant_thm23i(1.5, 1.0, 0.0, 1.0, 3.0)

    @given(gamma=gamma_strategy)
    @settings(max_examples=20, deadline=None)
    def test_log_power_constant_positive(self, gamma):
        assert constant_thm23i(3.0, 1.0, gamma, 5.0, 15.0) > 0.0

    def test_exponential_mode_validation(self):
        with pytest.raises(HypothesisError):
            MomentMode.exponential(0.0, 2.0)
        assert MomentMode.exponential(0.1, 2.0).to_dict() == {"mode": "exponential", "a": 0.1, "mu": 2.0}


class TestVillani:
    def test_equilibrium(self, m1, resolution):
        report = certify_villani(conditioned_tensor(m1, 20, resolution=resolution))
        assert report.verdict == Verdict.PASS

    def test_bimodal(self, ct_bimodal):
        report = certify_villani(ct_bimodal)
        assert report.verdict == Verdict.PASS
        assert report.rhs > 0
        assert report.constant == pytest.approx(1.0 / 3.0)


class TestLogScalable:
    def test_polynomial_mode_passes(self, ct_tailed):
        report = certify_thm22(ct_tailed, 0.5, MomentMode.polynomial(3), reference_ns=SMALL_NS)
        assert report.verdict == Verdict.PASS
        assert report.theorem_id == "thm22_i"
        assert report.parameters["C_F"] > 0

    def test_without_tail_model(self, grid, resolution, bimodal_f):
        f = from_values(bimodal_f.values, grid)
        ct = conditioned_tensor(f, 10, resolution=resolution)
        report = certify_thm22(ct, 0.0, MomentMode.polynomial(3), reference_ns=SMALL_NS)
        assert report.verdict == Verdict.INCONCLUSIVE

    def test_explicit_constants(self, ct_tailed):
        report = certify_thm22(ct_tailed, 0.0, MomentMode.polynomial(2), c_f=1.0, moment_bound=3.0)
        assert report.constant == pytest.approx(constant_thm22i(2.0, 0.0, 20, 1.0, 3.0))

    def test_exponential_mode_never_fails(self, ct_tailed):
        report = certify_thm22(ct_tailed, 0.5, MomentMode.exponential(0.1, 2.0), reference_ns=SMALL_NS)
        assert report.verdict in (Verdict.PASS, Verdict.INCONCLUSIVE)

    def test_gamma_one_rejected(self, ct_tailed):
        with pytest.raises(HypothesisError):
            certify_thm22(ct_tailed, 1.0, MomentMode.polynomial(3))


class TestLogPower:
    def test_polynomial_mode_passes(self, ct_tailed):
        report = certify_thm23(ct_tailed, 0.0, 1.0, MomentMode.polynomial(3), reference_ns=SMALL_NS)
        assert report.verdict == Verdict.PASS
        assert report.hypotheses["log_power_bound"]
        assert report.parameters["epsilon"] == pytest.approx(2.0)

    def test_constant_independent_of_n(self, bimodal_tailed, resolution):
        constants = [
            certify_thm23(
                conditioned_tensor(bimodal_tailed, n, resolution=resolution),
                0.5, 1.0, MomentMode.polynomial(3), reference_ns=SMALL_NS,
            ).constant
            for n in (10, 30)
        ]
        assert constants[0] == constants[1]

    def test_too_small_log_power_constant(self, ct_tailed):
        report = certify_thm23(ct_tailed, 0.0, 1.0, MomentMode.polynomial(3), c_log_power=1e-6)
        assert report.verdict == Verdict.INCONCLUSIVE
        assert not report.hypotheses["log_power_bound"]

    def test_rejects_nonpositive_beta(self, ct_tailed):
        with pytest.raises(HypothesisError):
            certify_thm23(ct_tailed, 0.0, 0.0, MomentMode.polynomial(3))


class TestKacBoltzmann:
    def test_polynomial_mode_passes(self, bimodal_tailed):
        report = certify_thm13(bimodal_tailed, 0.0, 1.0, MomentMode.polynomial(3))
        assert report.verdict == Verdict.PASS
        assert all(report.hypotheses.values())

    def test_missing_gaussian_lower_bound(self, bimodal_f):
        report = certify_thm13(bimodal_f, 0.0, 1.0, MomentMode.polynomial(3))
        assert report.verdict == Verdict.INCONCLUSIVE
        assert not report.hypotheses["lower_bound"]

    def test_exponential_mode_never_fails(self, bimodal_tailed):
        report = certify_thm13(bimodal_tailed, 0.5, 1.0, MomentMode.exponential(0.1, 2.0))
        assert report.verdict in (Verdict.PASS, Verdict.INCONCLUSIVE)

    @pytest.mark.slow
    def test_along_trajectory(self, coarse_grid):
        f0 = bimodal(tail_weight=0.05, grid=coarse_grid)
        trajectory = solve(f0, SolverConfig(t_end=1.0, theta_nodes=128, sample_times=[0.0, 0.5, 1.0]))
        reports = certify_thm13_along(trajectory, f0, 1.0, 3.0)
        assert [r.parameters["t"] for r in reports] == [0.0, 0.5, 1.0]
        assert len({r.constant for r in reports}) == 1
        assert not any_hard_failure(reports)


class TestTransfer:
    def test_bimodal(self, bimodal_f, ct_bimodal):
        eps = epsilon_thm23(3.0, 1.0, 0.5)
        report = certify_transfer_thm41(bimodal_f, eps, ct_bimodal, 0.5)
        assert report.verdict == Verdict.PASS
        assert report.parameters["C1"] > 0 and report.parameters["C2"] > 0
        # the brackets are not the measured ratios, so the bound is strict
        assert report.margin > report.tolerance

    def test_brackets_sandwich_sphere_functionals(self, ct_bimodal):
        b = bracket_constants(ct_bimodal, 0.5)
        h_n = entropy_HN(ct_bimodal) / ct_bimodal.n
        d_n = entropy_production_DN(ct_bimodal, 0.5) / ct_bimodal.n
        slack = 1e-3
        assert b.c1 * b.h_limit <= h_n * (1.0 + slack)
        assert h_n <= b.c2 * b.h_limit * (1.0 + slack)
        assert 0.0 < b.c3 <= b.c4
        assert b.c3 * b.d_limit <= d_n * (1.0 + slack)
        assert d_n <= b.c4 * b.d_limit * (1.0 + slack)

    def test_brackets_do_not_read_sphere_functionals(self, ct_bimodal):
        b = bracket_constants(ct_bimodal, 0.5)
        h_ratio = entropy_HN(ct_bimodal) / (ct_bimodal.n * b.h_limit)
        d_ratio = entropy_production_DN(ct_bimodal, 0.5) / (ct_bimodal.n * b.d_limit)
        assert b.c2 - h_ratio > 1e-4
        assert d_ratio - b.c3 > 1e-4

    def test_inconsistent_brackets_fail(self, bimodal_f, ct_bimodal):
        b = bracket_constants(ct_bimodal, 0.5)
        report = certify_transfer_thm41(bimodal_f, 0.1, ct_bimodal, 0.5, brackets=replace(b, c3=100.0 * b.c4))
        assert report.verdict == Verdict.FAIL

    def test_unavailable_brackets_are_inconclusive(self, bimodal_f, ct_bimodal):
        b = bracket_constants(ct_bimodal, 0.5)
        report = certify_transfer_thm41(bimodal_f, 0.1, ct_bimodal, 0.5, brackets=replace(b, c3=0.0))
        assert report.verdict == Verdict.INCONCLUSIVE

    def test_equilibrium_is_trivial(self, m1, resolution):
        report = certify_transfer_thm41(m1, 0.0, conditioned_tensor(m1, 10, resolution=resolution), 1.0)
        assert report.verdict == Verdict.PASS
        assert report.rhs == 0.0

    @pytest.mark.slow
    def test_bracket_ratio_falls_with_n(self, bimodal_f, resolution):
        reports, brackets = [], []
        for n in PROFILE_NS:
            ct = conditioned_tensor(bimodal_f, n, resolution=resolution)
            brackets.append(bracket_constants(ct, 1.0))
            reports.append(certify_transfer_thm41(bimodal_f, 0.0, ct, 1.0, brackets=brackets[-1]))
        assert all(r.verdict == Verdict.PASS for r in reports)
        lower = [b.c3 for b in brackets]
        assert lower == sorted(lower) and lower[-1] > lower[0]
        assert brackets[-1].spread < brackets[0].spread
        assert reports[-1].ratio < reports[0].ratio


class TestEnvelopes:
    @given(k=k_strategy, gamma=gamma_strategy)
    @settings(max_examples=30, deadline=None)
    def test_starts_at_h0_and_decreases(self, k, gamma):
        times = np.linspace(0.0, 50.0, 51)
        envelope = decay_envelope_thm24(0.3, 0.01, 100, k, gamma, times)
        assert envelope[0] == pytest.approx(0.3, rel=1e-12)
        assert np.all(np.diff(envelope) < 0)

    @given(k=k_strategy, gamma=gamma_strategy)
    @settings(max_examples=30, deadline=None)
    def test_half_time(self, k, gamma):
        t_half = envelope_half_time(0.3, 0.01, 100, k, gamma)
        assert decay_envelope_thm24(0.3, 0.01, 100, k, gamma, [t_half])[0] == pytest.approx(0.15, rel=1e-9)

    def test_rejections(self):
        with pytest.raises(HypothesisError):
            decay_envelope_thm24(0.3, 0.01, 100, 3.0, 1.0, [0.0])
        with pytest.raises(HypothesisError):
            decay_envelope_thm24(0.3, 0.01, 100, 1.0, 0.0, [0.0])
        with pytest.raises(HypothesisError):
            decay_envelope_thm24(0.0, 0.01, 100, 3.0, 0.0, [0.0])

    def test_villani_envelope(self):
        envelope = villani_envelope(0.2, 1.0 / 3.0, 10, 1.0, [0.0, 3.0])
        np.testing.assert_allclose(envelope, [0.2, 0.2 / np.e])

    def test_timescales(self):
        scales = decay_timescales(100, 3.0, 0.0)
        assert scales["villani"] == pytest.approx(100.0)
        assert scales["log_scalable"] == pytest.approx(10.0)


class TestReports:
    def reports(self):
        return [
            TheoremReport("villani", {"N": 10, "gamma": 1.0}, 0.2, 0.1, 1 / 3, 1e-6, Verdict.PASS),
            TheoremReport("thm22_i", {"N": 10, "gamma": 0.0}, 0.1, 0.2, 1e-3, 1e-6, Verdict.FAIL),
            TheoremReport("thm41", {"N": 10, "gamma": 0.0}, 0.0, 0.0, 0.0, 0.0, Verdict.INCONCLUSIVE),
        ]

    def test_margin_and_ratio(self):
        report = self.reports()[0]
        assert report.margin == pytest.approx(0.1)
        assert report.ratio == pytest.approx(2.0)
        assert self.reports()[2].ratio == 1.0

    def test_table(self):
        table = render_table(self.reports())
        assert "PASS" in table and "FAIL" in table and "INCONCLUSIVE" in table

    def test_bundle(self, tmp_path):
        path = write_report_bundle(self.reports(), tmp_path / "out" / "report.json")
        bundle = json.loads(path.read_text())
        assert bundle["hard_failures"] == 1
        assert bundle["reports"][1]["verdict"] == "fail"
        assert any_hard_failure(self.reports())
