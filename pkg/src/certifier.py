"""
Entropy / entropy-production inequality certifier.

Each certify_* function evaluates both sides of one inequality from the
sphere and solver modules, assembles the explicit constant, and returns a
TheoremReport. The additive tolerance of a report is ten times the
grid-halving error of its inputs.
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from boltzmann import BoltzmannTrajectory, dissipation_radial_measure, entropy_production_Dgamma_estimate
from density import DensityError, GridDensity, fisher_information, maxwellian, moment, moments, relative_entropy
from quadrature import gauss_legendre
from sphere import (
    ConditionedTensor,
    QuadratureError,
    SphereError,
    TailBoundViolation,
    check_tail_bounds,
    conditioned_tensor,
    entropy_HN_estimate,
    entropy_production_DN_estimate,
    log_power_constant,
    log_power_integral_estimate,
    log_scalability_audit,
    log_scalability_constant,
    marginal_exp_moment,
    marginal_mass,
    profile_weight,
    sup_marginal_moment,
)

logger = logging.getLogger(__name__)

TOLERANCE_FACTOR = 10.0
REFERENCE_NS = (10, 100, 1000)


class HypothesisError(ValueError):
    """Parameters outside the range where the inequality is stated."""


class Verdict(Enum):
    PASS = "pass"
    FAIL = "fail"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class MomentMode:
    """Polynomial moment M_2k or exponential moment ∫ e^{a|v|^mu}."""

    kind: str
    k: Optional[float] = None
    a: Optional[float] = None
    mu: Optional[float] = None

    @classmethod
    def polynomial(cls, k: float) -> "MomentMode":
        return cls("polynomial", k=float(k))

    @classmethod
    def exponential(cls, a: float, mu: float) -> "MomentMode":
        if a <= 0 or mu <= 0:
            raise HypothesisError(f"exponential mode needs a, mu > 0, got a={a}, mu={mu}")
        return cls("exponential", a=float(a), mu=float(mu))

    def to_dict(self) -> dict:
        data = {"mode": self.kind}
        if self.kind == "polynomial":
            data["k"] = self.k
        else:
            data.update(a=self.a, mu=self.mu)
        return data


@dataclass
class TheoremReport:
    theorem_id: str
    parameters: dict
    lhs: float
    rhs: float
    constant: float
    tolerance: float
    verdict: Verdict
    notes: list = field(default_factory=list)
    hypotheses: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs

    @property
    def ratio(self) -> float:
        if self.rhs > 0:
            return self.lhs / self.rhs
        return float("inf") if self.lhs > 0 else 1.0

    @property
    def passed(self) -> bool:
        return self.verdict == Verdict.PASS

    def to_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "parameters": self.parameters,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "constant": self.constant,
            "margin": self.margin,
            "ratio": self.ratio,
            "tolerance": self.tolerance,
            "verdict": self.verdict.value,
            "notes": list(self.notes),
            "hypotheses": self.hypotheses,
        }


def _judge(lhs: float, rhs: float, tolerance: float) -> Verdict:
    return Verdict.PASS if lhs - rhs >= -tolerance else Verdict.FAIL


def _inconclusive(theorem_id: str, parameters: dict, note: str, **extra) -> TheoremReport:
    logger.info("%s inconclusive: %s", theorem_id, note)
    return TheoremReport(
        theorem_id=theorem_id,
        parameters=parameters,
        lhs=extra.get("lhs", float("nan")),
        rhs=extra.get("rhs", float("nan")),
        constant=extra.get("constant", float("nan")),
        tolerance=extra.get("tolerance", 0.0),
        verdict=Verdict.INCONCLUSIVE,
        notes=[note],
        hypotheses=extra.get("hypotheses", {}),
    )


def _power_tolerance(constant: float, x: float, power: float, x_error: float) -> float:
    """Propagated error of constant·x^power."""
    if x <= 0:
        return constant * x_error ** power
    return constant * power * x ** (power - 1.0) * x_error


def _sphere_sides(ct: ConditionedTensor, gamma: float) -> tuple:
    """(H_N/N, its error, D_{N,γ}/N, its error) with H clamped at 0."""
    h = entropy_HN_estimate(ct)
    d = entropy_production_DN_estimate(ct, gamma)
    n = ct.n
    return max(h.value, 0.0) / n, h.error / n, max(d.value, 0.0) / n, d.error / n


def _check_gamma(gamma: float, upper_open: bool = True):
    if gamma < 0 or gamma > 1 or (upper_open and gamma == 1):
        bound = "[0, 1)" if upper_open else "[0, 1]"
        raise HypothesisError(f"gamma must lie in {bound}, got {gamma}")


# ---------------------------------------------------------------------------
# Villani
# ---------------------------------------------------------------------------

def certify_villani(ct: ConditionedTensor) -> TheoremReport:
    """D_{N,1}(F_N) >= H_N(F_N)/3."""
    parameters = {"N": ct.n, "gamma": 1.0, "density": ct.base.name}
    try:
        h = entropy_HN_estimate(ct)
        d = entropy_production_DN_estimate(ct, 1.0)
    except QuadratureError as exc:
        return _inconclusive("villani", parameters, str(exc))
    lhs, rhs = max(d.value, 0.0), max(h.value, 0.0) / 3.0
    tolerance = TOLERANCE_FACTOR * (d.error + h.error / 3.0)
    report = TheoremReport("villani", parameters, lhs, rhs, 1.0 / 3.0, tolerance, _judge(lhs, rhs, tolerance))
    logger.info("villani N=%d: D=%.6e H/3=%.6e -> %s", ct.n, lhs, rhs, report.verdict.value)
    return report


# ---------------------------------------------------------------------------
# Log-scalable families
# ---------------------------------------------------------------------------

def constant_thm22i(k: float, gamma: float, n: int, c_f: float, m_2k: float) -> float:
    """
    C_{k,γ,N} = (k-1)/(3^{(2k-γk-γ)/(k-1)}(1-γ)) · ((1-γ)/(k-γ))^{(k-γ)/(k-1)}
                · (2C_F)^{-(1-γ)/(k-1)} · (1+2M_2k)^{-(1-γ)/(k-1)} · N^{(γ-1)/(k-1)}.
    """
    if k <= 1:
        raise HypothesisError(f"k must exceed 1, got {k}")
    _check_gamma(gamma)
    if c_f <= 0 or m_2k <= 0:
        raise HypothesisError(f"C_F and M_2k must be positive, got {c_f}, {m_2k}")
    p = (1.0 - gamma) / (k - 1.0)
    log_c = (
        np.log(k - 1.0)
        - (2.0 * k - gamma * k - gamma) / (k - 1.0) * np.log(3.0)
        - np.log(1.0 - gamma)
        + (k - gamma) / (k - 1.0) * np.log((1.0 - gamma) / (k - gamma))
        - p * np.log(2.0 * c_f)
        - p * np.log(1.0 + 2.0 * m_2k)
        - p * np.log(n)
    )
    return float(np.exp(log_c))


def _exp_moment_sup(f: GridDensity, a: float, mu: float, ns: Sequence[int], resolution) -> float:
    values = [f.integrate(np.exp(a * np.abs(f.nodes) ** mu) * f.values)]
    for n in ns:
        values.append(marginal_exp_moment(conditioned_tensor(f, n, 1, resolution), a, mu))
    return float(max(values))


def certify_thm22(
    ct: ConditionedTensor,
    gamma: float,
    mode: MomentMode,
    c_f: Optional[float] = None,
    moment_bound: Optional[float] = None,
    reference_ns: Sequence[int] = REFERENCE_NS,
) -> TheoremReport:
    """
    D_{N,γ}/N >= C_{k,γ,N}·(H_N/N)^{1+(1-γ)/(k-1)}, or the logarithmic form
    with an exponential moment.
    """
    _check_gamma(gamma)
    theorem_id = "thm22_" + ("i" if mode.kind == "polynomial" else "ii")
    parameters = {"N": ct.n, "gamma": gamma, "density": ct.base.name, **mode.to_dict()}
    f = ct.base
    notes = []
    if c_f is None:
        if f.tail_model is None:
            return _inconclusive(theorem_id, parameters, "no declared tail model; C_F unavailable")
        try:
            c_f = log_scalability_constant(ct, f.tail_model)
        except TailBoundViolation as exc:
            return _inconclusive(theorem_id, parameters, str(exc))
        audit = log_scalability_audit(ct, c_f)
        if audit > c_f:
            notes.append(f"sphere audit sup|log F_N|/N = {audit:.4f} exceeds C_F")
    parameters["C_F"] = c_f
    ns = sorted(set(reference_ns) | {ct.n})
    try:
        h, h_err, d, d_err = _sphere_sides(ct, gamma)
    except QuadratureError as exc:
        return _inconclusive(theorem_id, parameters, str(exc))

    if mode.kind == "polynomial":
        if mode.k <= 1:
            raise HypothesisError(f"k must exceed 1, got {mode.k}")
        m_2k = moment_bound if moment_bound is not None else sup_marginal_moment(f, 2 * mode.k, ns, ct.resolution)
        parameters["M_2k"] = m_2k
        constant = constant_thm22i(mode.k, gamma, ct.n, c_f, m_2k)
        power = 1.0 + (1.0 - gamma) / (mode.k - 1.0)
        rhs = constant * h ** power
        tolerance = TOLERANCE_FACTOR * (d_err + _power_tolerance(constant, h, power, h_err))
    else:
        a, mu = mode.a, mode.mu
        m_exp = moment_bound if moment_bound is not None else _exp_moment_sup(f, a, mu, ns, ct.resolution)
        parameters["M_exp"] = m_exp
        if h <= 0:
            return TheoremReport(theorem_id, parameters, d, 0.0, 0.0, TOLERANCE_FACTOR * d_err,
                                 _judge(d, 0.0, TOLERANCE_FACTOR * d_err), notes)
        log_a = (
            np.log(96.0 * c_f) + (2.0 / mu) * np.log(4.0 / (a * mu * np.e))
            + a / 2.0 ** (mu / 2.0) + np.log(m_exp)
        )
        log_arg = log_a + np.log(ct.n / h)
        if log_arg <= 0:
            return _inconclusive(theorem_id, parameters, "log argument <= 1 (H_N/N not small)", lhs=d)
        bracket = 6.0 * 4.0 ** (1.0 - gamma) * ((2.0 / a) * log_arg) ** (2.0 * (1.0 - gamma) / mu)
        constant = 1.0 / bracket
        rhs = constant * h
        tolerance = TOLERANCE_FACTOR * (d_err + constant * h_err)
    report = TheoremReport(theorem_id, parameters, d, rhs, constant, tolerance, _judge(d, rhs, tolerance), notes)
    logger.info("%s N=%d gamma=%g: lhs=%.6e rhs=%.6e -> %s", theorem_id, ct.n, gamma, d, rhs, report.verdict.value)
    return report


# ---------------------------------------------------------------------------
# Log-power families
# ---------------------------------------------------------------------------

def epsilon_thm23(k: float, beta: float, gamma: float) -> float:
    """ε = (1-γ)(1+β)/(kβ-(1+β))."""
    denominator = k * beta - (1.0 + beta)
    if denominator <= 0:
        raise HypothesisError(f"need k > 1 + 1/beta, got k={k}, beta={beta}")
    return (1.0 - gamma) * (1.0 + beta) / denominator


def constant_thm23i(k: float, beta: float, gamma: float, c: float, m_2k: float) -> float:
    """N-independent constant 𝒞_ε of the log-power inequality."""
    _check_gamma(gamma)
    if c <= 0 or m_2k <= 0:
        raise HypothesisError(f"C and M_2k must be positive, got {c}, {m_2k}")
    q = k * beta - (1.0 + beta)
    if q <= 0:
        raise HypothesisError(f"need k > 1 + 1/beta, got k={k}, beta={beta}")
    b1 = 1.0 + beta
    log_c = (
        np.log(q / (b1 * (1.0 - gamma)))
        + (k * beta - gamma * b1) / q * np.log(b1 * (1.0 - gamma) / q)
        + (1.0 - gamma) / q * np.log(2.0)
        - (2.0 * k * beta - k * beta * gamma - gamma * b1) / q * np.log(3.0)
        - b1 * (1.0 - gamma) / q * np.log(c)
        - beta * (1.0 - gamma) / q * np.log(1.0 + 2.0 * m_2k)
    )
    return float(np.exp(log_c))


def _log_power_exp_rhs(h: float, c: float, beta: float, gamma: float, a: float, mu: float, m_exp: float) -> Optional[tuple]:
    """(constant, rhs) of the exponential log-power form; None when the log argument is <= 1."""
    b = (1.0 + beta) / beta
    log_y = (
        np.log(4.0) + b * np.log(c)
        + (2.0 * (1.0 + beta) / (beta * mu)) * np.log(2.0 ** (2.0 + mu) * (1.0 + beta) / (a * beta * mu * np.e))
        + a / 2.0 ** (mu / 2.0) + np.log(m_exp)
        - b * np.log(h / 6.0)
    )
    if log_y <= 0:
        return None
    constant = abs(2.0 ** (1.0 + mu) / a * log_y) ** (-2.0 * (1.0 - gamma) / mu)
    return constant, constant * h


def certify_thm23(
    ct: ConditionedTensor,
    gamma: float,
    beta: float,
    mode: MomentMode,
    c_log_power: Optional[float] = None,
    moment_bound: Optional[float] = None,
    eps: float = 0.5,
    reference_ns: Sequence[int] = REFERENCE_NS,
) -> TheoremReport:
    """
    D_{N,γ}/N >= 𝒞_ε·(H_N/N)^{1+ε} for families with the log-power property.

    The constant uses only f-level quantities and sup-over-reference-N moments,
    so it is the same for every N.
    """
    _check_gamma(gamma)
    if beta <= 0:
        raise HypothesisError(f"beta must be positive, got {beta}")
    theorem_id = "thm23_" + ("i" if mode.kind == "polynomial" else "ii")
    parameters = {"N": ct.n, "gamma": gamma, "beta": beta, "eps": eps, "density": ct.base.name, **mode.to_dict()}
    f = ct.base
    notes = []
    if mode.kind == "polynomial":
        epsilon = epsilon_thm23(mode.k, beta, gamma)
        parameters["epsilon"] = epsilon
    if c_log_power is None:
        try:
            c_log_power = log_power_constant(f, beta, eps=eps, resolution=ct.resolution)
        except (SphereError, ValueError) as exc:
            return _inconclusive(theorem_id, parameters, f"log-power constant unavailable: {exc}")
    parameters["C"] = c_log_power
    measured = log_power_integral_estimate(ct, beta)
    parameters["log_power_integral"] = measured.value
    hypotheses = {"log_power_bound": measured.value <= c_log_power + TOLERANCE_FACTOR * measured.error}
    if not hypotheses["log_power_bound"]:
        return _inconclusive(theorem_id, parameters, "measured log-power integral exceeds C", hypotheses=hypotheses)
    try:
        h, h_err, d, d_err = _sphere_sides(ct, gamma)
    except QuadratureError as exc:
        return _inconclusive(theorem_id, parameters, str(exc))

    if mode.kind == "polynomial":
        m_2k = moment_bound if moment_bound is not None else sup_marginal_moment(
            f, 2 * mode.k, reference_ns, ct.resolution
        )
        parameters["M_2k"] = m_2k
        constant = constant_thm23i(mode.k, beta, gamma, c_log_power, m_2k)
        power = 1.0 + epsilon
        rhs = constant * h ** power
        tolerance = TOLERANCE_FACTOR * (d_err + _power_tolerance(constant, h, power, h_err))
    else:
        m_exp = moment_bound if moment_bound is not None else _exp_moment_sup(
            f, mode.a, mode.mu, reference_ns, ct.resolution
        )
        parameters["M_exp"] = m_exp
        if h <= 0:
            tolerance = TOLERANCE_FACTOR * d_err
            return TheoremReport(theorem_id, parameters, d, 0.0, 0.0, tolerance, _judge(d, 0.0, tolerance),
                                 notes, hypotheses)
        sides = _log_power_exp_rhs(h, c_log_power, beta, gamma, mode.a, mode.mu, m_exp)
        if sides is None:
            return _inconclusive(theorem_id, parameters, "log argument <= 1 (H_N/N not small)",
                                 lhs=d, hypotheses=hypotheses)
        constant, rhs = sides
        tolerance = TOLERANCE_FACTOR * (d_err + constant * h_err)
    report = TheoremReport(theorem_id, parameters, d, rhs, constant, tolerance,
                           _judge(d, rhs, tolerance), notes, hypotheses)
    logger.info("%s N=%d gamma=%g: lhs=%.6e rhs=%.6e -> %s", theorem_id, ct.n, gamma, d, rhs, report.verdict.value)
    return report


# ---------------------------------------------------------------------------
# Kac-Boltzmann level
# ---------------------------------------------------------------------------

def limit_log_power_constant(f: GridDensity, beta: float, k: Optional[float] = None, eps: float = 0.5) -> float:
    """
    C_f = [2^{1+2β}√3 (2(C_ε I(f)^{ε/2})^{1+β} + (1+C_{k,β}) M_{k(1+β)}(f))]^{1/(1+β)}.

    Without k the confinement form from the tail model is used.
    """
    return log_power_constant(f, beta, k=k, eps=eps, ratio=1.0)


def thm13_hypotheses(f: GridDensity, beta: float, mode: MomentMode) -> dict:
    """Itemized hypotheses: unit energy, moments, Fisher information, Gaussian lower bound."""
    hypotheses = {"unit_energy": abs(moment(f, 2) - 1.0) <= 1e-8}
    if mode.kind == "polynomial":
        order = max(2.0 * mode.k, mode.k * (1.0 + beta))
        hypotheses["moments"] = bool(np.isfinite(moment(f, order)))
    else:
        report = moments(f, ks=(), exp_params=(mode.a, mode.mu))
        hypotheses["moments"] = bool(np.isfinite(report.m_exp)) and report.is_finite("m_exp")
    hypotheses["fisher"] = bool(np.isfinite(fisher_information(f)))
    tail = f.tail_model
    lower_ok = tail is not None and tail.c1 > 0 and tail.a1 <= 1.0
    if lower_ok:
        try:
            check_tail_bounds(f, tail)
        except TailBoundViolation:
            lower_ok = False
    hypotheses["lower_bound"] = lower_ok
    return hypotheses


def constant_thm13(f: GridDensity, gamma: float, beta: float, k: float, eps: float = 0.5) -> float:
    """𝒞 of the Kac-Boltzmann inequality, from C_f and M_2k(f)."""
    c_f = limit_log_power_constant(f, beta, k=k, eps=eps)
    return constant_thm23i(k, beta, gamma, c_f, moment(f, 2 * k))


def certify_thm13(
    f: GridDensity,
    gamma: float,
    beta: float,
    mode: MomentMode,
    eps: float = 0.5,
    dissipation: Optional[tuple] = None,
    constant: Optional[float] = None,
) -> TheoremReport:
    """
    D_γ(f) >= 𝒞·H(f|M)^{1+ε}, or the logarithmic form with an exponential moment.

    `dissipation` may pass a precomputed (value, error) of D_γ(f); `constant`
    a time-uniform 𝒞.
    """
    _check_gamma(gamma)
    if beta <= 0:
        raise HypothesisError(f"beta must be positive, got {beta}")
    theorem_id = "thm13_" + ("poly" if mode.kind == "polynomial" else "exp")
    parameters = {"gamma": gamma, "beta": beta, "eps": eps, "density": f.name, **mode.to_dict()}
    hypotheses = thm13_hypotheses(f, beta, mode) if constant is None else {}
    failed = [name for name, ok in hypotheses.items() if not ok]
    if failed:
        return _inconclusive(theorem_id, parameters, f"hypotheses failed: {', '.join(failed)}",
                             hypotheses=hypotheses)
    h = max(relative_entropy(f, maxwellian(1.0, f.grid)), 0.0)
    if dissipation is None:
        estimate = entropy_production_Dgamma_estimate(f, gamma)
        d, d_err = estimate.value, estimate.error
    else:
        d, d_err = dissipation
    parameters["H"] = h

    if mode.kind == "polynomial":
        epsilon = epsilon_thm23(mode.k, beta, gamma)
        parameters["epsilon"] = epsilon
        if constant is None:
            constant = constant_thm13(f, gamma, beta, mode.k, eps)
        rhs = constant * h ** (1.0 + epsilon)
    else:
        if h <= 0:
            constant, rhs = constant or 0.0, 0.0
        else:
            m_exp = f.integrate(np.exp(mode.a * np.abs(f.nodes) ** mode.mu) * f.values)
            c_f = limit_log_power_constant(f, beta, eps=eps)
            # the N → ∞ form of the exponential log-power bound, with H_N/N -> H
            sides = _log_power_exp_rhs(h, c_f, beta, gamma, mode.a, mode.mu, m_exp)
            if sides is None:
                return _inconclusive(theorem_id, parameters, "log argument <= 1", lhs=d, hypotheses=hypotheses)
            constant, rhs = sides
    tolerance = TOLERANCE_FACTOR * d_err
    report = TheoremReport(theorem_id, parameters, d, rhs, constant, tolerance,
                           _judge(d, rhs, tolerance), [], hypotheses)
    logger.info("%s: D=%.6e rhs=%.6e -> %s", theorem_id, d, rhs, report.verdict.value)
    return report


def certify_thm13_along(
    trajectory: BoltzmannTrajectory,
    f0: GridDensity,
    beta: float,
    k: float,
    eps: float = 0.5,
) -> list:
    """
    Certify the polynomial Kac-Boltzmann inequality at every sample time with one
    time-independent constant.

    I(f(t)) is non-increasing and moments stay below max(initial, equilibrium),
    so the worst case over the samples bounds every time.
    """
    mode = MomentMode.polynomial(k)
    hypotheses = thm13_hypotheses(f0, beta, mode)
    failed = [name for name, ok in hypotheses.items() if not ok]
    if failed:
        return [_inconclusive("thm13_poly", {"t": 0.0}, f"hypotheses failed: {', '.join(failed)}",
                              hypotheses=hypotheses)]
    gamma = trajectory.gamma
    constants = [constant_thm13(f, gamma, beta, k, eps) for f in trajectory.densities]
    uniform = min(constants)
    reports = []
    dissipations = trajectory.D or [None] * len(trajectory.times)
    for t, f, d in zip(trajectory.times, trajectory.densities, dissipations):
        estimate = entropy_production_Dgamma_estimate(f, gamma)
        value = d if d is not None else estimate.value
        report = certify_thm13(f, gamma, beta, mode, eps, dissipation=(value, estimate.error), constant=uniform)
        report.parameters["t"] = t
        report.hypotheses = dict(hypotheses)
        reports.append(report)
    return reports


# ---------------------------------------------------------------------------
# Transfer from the limit equation to the walk
# ---------------------------------------------------------------------------

LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
WEIGHT_POINTS = 2001


@dataclass
class BracketConstants:
    """
    C₁·H(f|M) <= H_N/N <= C₂·H(f|M) and C₃·D_γ(f) <= D_{N,γ}/N <= C₄·D_γ(f)
    at one N, from the concentration-profile weights of the marginals.
    """

    n: int
    gamma: float
    c1: float
    c2: float
    c3: float
    c4: float
    h_limit: float
    d_limit: float
    entropy_shift: float
    h_cutoff: float
    d_cutoff: float

    @property
    def spread(self) -> float:
        return max(abs(c - 1.0) for c in (self.c1, self.c2, self.c3, self.c4))

    @property
    def available(self) -> bool:
        return self.c3 > 0 and np.isfinite(self.c2) and self.c2 > 0

    def to_dict(self) -> dict:
        return {
            "N": self.n,
            "gamma": self.gamma,
            "C1": self.c1,
            "C2": self.c2,
            "C3": self.c3,
            "C4": self.c4,
            "H": self.h_limit,
            "D": self.d_limit,
            "entropy_shift": self.entropy_shift,
            "h_cutoff": self.h_cutoff,
            "d_cutoff": self.d_cutoff,
        }


def _truncated_lower_bound(ct: ConditionedTensor, k: int, sigma2: float, s_dense, w_dense, s, mass) -> tuple:
    """
    max over cutoffs S of inf_{s<=S} w_k(s) · mass{s <= S}, for non-negative
    `mass` at ascending `s`; returns (bound, best S).
    """
    prefix = np.minimum.accumulate(w_dense)
    idx = np.clip(np.searchsorted(s_dense, s, side="right") - 1, 0, None)
    at_nodes = np.minimum.accumulate(profile_weight(ct, k, s, sigma2))
    inf_w = np.where(s < ct.n, np.minimum(prefix[idx], at_nodes), 0.0)
    candidates = inf_w * np.cumsum(mass)
    best = int(np.argmax(candidates))
    return float(candidates[best]), float(s[best])


def bracket_constants(ct: ConditionedTensor, gamma: float) -> BracketConstants:
    """
    Explicit brackets of H_N/N and D_{N,γ}/N by their mean-field limits.

    The k-particle marginal of F_N is w_k(Σv²)·f^{⊗k} with
    w_k(s) = √(N/(N-k))·P_{N-k}(N-s)/P_N(N), P the concentration profile.
    D_{N,γ}/N integrates w₂ against the non-negative radial measure of D_γ(f),
    so sup w₂ bounds it above and inf w₂ on a disc, times the measure of the
    disc, below. H_N/N = ∫ w₁φ + (∫ w₁f - ∫ w₁M) - log(Z_N(f)/Z_N(M))/N with
    φ = f log(f/M) - f + M >= 0 and ∫ φ = H(f|M).
    """
    _check_gamma(gamma, upper_open=False)
    f, n = ct.base, ct.n
    sigma2 = moment(f, 4) - 1.0
    if sigma2 <= 0:
        raise SphereError(f"{f.name} has Σ² = {sigma2}; no concentration profile")
    s_dense = np.linspace(0.0, float(n), WEIGHT_POINTS, endpoint=False)
    w1_dense = profile_weight(ct, 1, s_dense, sigma2)
    w2_dense = profile_weight(ct, 2, s_dense, sigma2)

    v, qw = gauss_legendre(ct.resolution.chi_nodes, -f.support_radius, f.support_radius)
    log_f = f.log_evaluate(v)
    log_m = -LOG_SQRT_2PI - 0.5 * v * v
    f_v, m_v = np.exp(log_f), np.exp(log_m)
    with np.errstate(invalid="ignore"):
        phi = np.where(np.isfinite(log_f), f_v * (log_f - log_m) - f_v + m_v, m_v)
    phi = np.maximum(phi, 0.0) * qw
    h_limit = float(phi.sum())
    if h_limit <= 0:
        raise DensityError(f"{f.name} is at equilibrium; brackets are undefined")

    root = np.sqrt(n)
    chi, cw = gauss_legendre(ct.resolution.chi_nodes, -0.5 * np.pi, 0.5 * np.pi)
    vm = root * np.sin(chi)
    maxwell_mass = float(np.sum(
        cw * root * np.cos(chi) * np.exp(-LOG_SQRT_2PI - 0.5 * vm * vm) * profile_weight(ct, 1, vm * vm, sigma2)
    ))
    log_z_ratio = ct.log_z_n / n + LOG_SQRT_2PI + 0.5
    shift = marginal_mass(ct) - maxwell_mass - log_z_ratio

    order = np.argsort(v * v)
    h_low, h_cut = _truncated_lower_bound(ct, 1, sigma2, s_dense, w1_dense, (v * v)[order], phi[order])
    rho, d_mass = dissipation_radial_measure(f, gamma)
    d_mass = np.maximum(d_mass, 0.0)
    d_limit = float(d_mass.sum())
    if d_limit <= 0:
        raise DensityError(f"D_{gamma:g}({f.name}) vanishes; brackets are undefined")
    d_low, d_cut = _truncated_lower_bound(ct, 2, sigma2, s_dense, w2_dense, rho * rho, d_mass)

    brackets = BracketConstants(
        n=n,
        gamma=gamma,
        c1=max(h_low / h_limit + shift / h_limit, 0.0),
        c2=float(w1_dense.max()) + shift / h_limit,
        c3=d_low / d_limit,
        c4=float(w2_dense.max()),
        h_limit=h_limit,
        d_limit=d_limit,
        entropy_shift=float(shift),
        h_cutoff=h_cut,
        d_cutoff=d_cut,
    )
    logger.debug("brackets at N=%d: %s", n, brackets.to_dict())
    return brackets


def certify_transfer_thm41(
    f: GridDensity,
    eps_limit: float,
    ct: ConditionedTensor,
    gamma: float,
    trajectory: Optional[BoltzmannTrajectory] = None,
    brackets: Optional[BracketConstants] = None,
) -> TheoremReport:
    """
    D_{N,γ}/N >= K₁C₂·(H_N/(C₁N))^{1+ε}.

    K₁ = D_γ/H^{1+ε} at f, or its minimum along `trajectory`. C₁ is the upper
    entropy bracket and C₂ the lower dissipation bracket of bracket_constants,
    so the check exercises the concentration profile against the two-particle
    reduction of D_{N,γ}.
    """
    _check_gamma(gamma, upper_open=False)
    parameters = {"N": ct.n, "gamma": gamma, "eps": eps_limit, "density": f.name}
    h_limit = max(relative_entropy(f, maxwellian(1.0, f.grid)), 0.0)
    try:
        h, h_err, d, d_err = _sphere_sides(ct, gamma)
    except QuadratureError as exc:
        return _inconclusive("thm41", parameters, str(exc))
    tolerance = TOLERANCE_FACTOR * d_err
    if h_limit <= 1e-14:
        return TheoremReport("thm41", parameters, d, 0.0, 0.0, tolerance, _judge(d, 0.0, tolerance),
                             ["equilibrium: both sides vanish"])
    try:
        brackets = brackets or bracket_constants(ct, gamma)
    except (SphereError, DensityError) as exc:
        return _inconclusive("thm41", parameters, f"bracket constants unavailable: {exc}")
    parameters["brackets"] = brackets.to_dict()
    if not brackets.available:
        return _inconclusive("thm41", parameters, f"bracket constants unavailable at N={ct.n}",
                             lhs=d, tolerance=tolerance)
    k1_values = [brackets.d_limit / brackets.h_limit ** (1.0 + eps_limit)]
    if trajectory is not None:
        for h_t, d_t in zip(trajectory.H, trajectory.D):
            if h_t > 1e-12 and d_t > 0:
                k1_values.append(d_t / h_t ** (1.0 + eps_limit))
    k1 = min(k1_values)
    c1, c2 = brackets.c2, brackets.c3
    parameters.update(K1=k1, C1=c1, C2=c2, H=brackets.h_limit, D=brackets.d_limit)
    constant = k1 * c2 / c1 ** (1.0 + eps_limit)
    rhs = constant * h ** (1.0 + eps_limit)
    tolerance = TOLERANCE_FACTOR * (d_err + _power_tolerance(constant, h, 1.0 + eps_limit, h_err))
    report = TheoremReport("thm41", parameters, d, rhs, constant, tolerance, _judge(d, rhs, tolerance))
    logger.info("thm41 N=%d: C1=%.4f C2=%.4f -> %s", ct.n, c1, c2, report.verdict.value)
    return report


# ---------------------------------------------------------------------------
# Decay envelopes
# ---------------------------------------------------------------------------

def decay_envelope_thm24(h0: float, c: float, n: int, k: float, gamma: float, times) -> np.ndarray:
    """((H0)^{(γ-1)/(k-1)} + C·N^{(γ-1)/(k-1)}·t)^{-(k-1)/(1-γ)}."""
    if gamma >= 1:
        raise HypothesisError("gamma = 1 gives the exponential Villani envelope; use villani_envelope")
    if gamma < 0:
        raise HypothesisError(f"gamma must lie in [0, 1), got {gamma}")
    if c <= 0 or k <= 1 or h0 <= 0:
        raise HypothesisError(f"need C > 0, k > 1, H0 > 0, got C={c}, k={k}, H0={h0}")
    p = (gamma - 1.0) / (k - 1.0)
    t = np.asarray(times, dtype=float)
    return (h0 ** p + c * n ** p * t) ** (1.0 / p)


def envelope_half_time(h0: float, c: float, n: int, k: float, gamma: float) -> float:
    """Time at which decay_envelope_thm24 reaches H0/2."""
    q = (1.0 - gamma) / (k - 1.0)
    return n ** q * (2.0 ** q - 1.0) / (c * h0 ** q)


def villani_envelope(h0: float, c: float, n: int, gamma: float, times) -> np.ndarray:
    """(H_N(0)/N)·exp(-C·N^{γ-1}·t)."""
    return h0 * np.exp(-c * n ** (gamma - 1.0) * np.asarray(times, dtype=float))


def decay_timescales(n: int, k: float, gamma: float) -> dict:
    """Times of significant decay: N^{1-γ} (Villani) and N^{(1-γ)/(k-1)} (log-scalable)."""
    return {"villani": float(n ** (1.0 - gamma)), "log_scalable": float(n ** ((1.0 - gamma) / (k - 1.0)))}


# ---------------------------------------------------------------------------
# Output
# ---------------------------------------------------------------------------

def render_table(reports: Sequence[TheoremReport]) -> str:
    header = f"{'theorem':<12} {'N':>6} {'gamma':>6} {'lhs':>13} {'rhs':>13} {'margin':>13} {'tol':>10}  verdict"
    lines = [header, "-" * len(header)]
    for r in reports:
        n = r.parameters.get("N", "-")
        lines.append(
            f"{r.theorem_id:<12} {n!s:>6} {r.parameters.get('gamma', float('nan')):>6.3g} "
            f"{r.lhs:>13.6e} {r.rhs:>13.6e} {r.margin:>13.6e} {r.tolerance:>10.2e}  {r.verdict.value.upper()}"
        )
    return "\n".join(lines)


def write_report_bundle(reports: Sequence[TheoremReport], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bundle = {
        "reports": [r.to_dict() for r in reports],
        "hard_failures": sum(r.verdict == Verdict.FAIL for r in reports),
    }
    path.write_text(json.dumps(bundle, indent=2))
    return path


def any_hard_failure(reports: Sequence[TheoremReport]) -> bool:
    return any(r.verdict == Verdict.FAIL for r in reports)
