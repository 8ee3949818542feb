"""
Conditioned tensorisations on the sphere S^{N-1}(√N).

F_N = f^{⊗N} / Z_N(f, √N), where Z_m(f, r) is the average of f^{⊗m} over the
sphere of radius r under its normalized uniform measure. Z_m is built in the
log domain by splitting coordinates into two blocks:

    Z_{m1+m2}(r) = E_φ[ Z_{m1}(r cos φ) · Z_{m2}(r sin φ) ],

with φ on [0, π/2] weighted by cos^{m1-1}φ · sin^{m2-1}φ, and
Z_1(ρ) = (f(ρ) + f(-ρ)) / 2. Binary doubling gives Z_m in O(log m)
combinations. The tables are stored as splines of log Z_m on a uniform radius
grid. For a base with declared compact support the φ-quadrature is split
at the angles where an argument crosses the support edge.

Marginals, H_N, D_{N,γ} and the log-power integral all reduce to one- and
two-dimensional integrals weighted by ratios of these tables.
"""

import csv
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline
from scipy.special import gammaln, logsumexp

import cache
from config import (
    CHI_NODES,
    PAIR_RADIUS_NODES,
    RADIAL_NODES,
    SPLIT_NODES,
    THETA_NODES,
)
from density import GridDensity, DegenerateDensityError, DensityError, TailModel, moment, moments
from quadrature import (
    circle_angles,
    circle_pair_sums,
    gauss_legendre,
    log_sphere_area,
    psi_beta_kernel,
    psi_kernel,
)

logger = logging.getLogger(__name__)

LOG_2 = float(np.log(2.0))
INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)
PROFILE_NS = (20, 80, 320)


class SphereError(ValueError):
    """Invalid request for a sphere functional."""


class UnitEnergyError(SphereError):
    """Base density does not have unit second moment."""


class MissingTableRowError(SphereError):
    """The log-partition table lacks the row m = N - k."""


class TailBoundViolation(SphereError):
    """Declared tail bounds fail at a grid node."""

    def __init__(self, index: int, v: float, value: float, bound: float, side: str):
        self.index, self.v, self.value, self.bound, self.side = index, v, value, bound, side
        super().__init__(
            f"{side} tail bound violated at node {index} (v={v:.6g}): "
            f"f={value:.6e}, bound={bound:.6e}"
        )


class QuadratureError(RuntimeError):
    """A nonnegative functional came out negative beyond tolerance."""


@dataclass(frozen=True)
class SphereResolution:
    radial_nodes: int = RADIAL_NODES
    split_nodes: int = SPLIT_NODES
    chi_nodes: int = CHI_NODES
    pair_radius_nodes: int = PAIR_RADIUS_NODES
    theta_nodes: int = THETA_NODES

    def halved(self) -> "SphereResolution":
        """Coarser quadrature for Richardson error estimates (tables unchanged)."""
        return replace(
            self,
            chi_nodes=max(self.chi_nodes // 2, 8),
            pair_radius_nodes=max(self.pair_radius_nodes // 2, 8),
            theta_nodes=max(self.theta_nodes // 2, 8),
        )

    def to_dict(self) -> dict:
        return {
            "radial_nodes": self.radial_nodes,
            "split_nodes": self.split_nodes,
            "chi_nodes": self.chi_nodes,
            "pair_radius_nodes": self.pair_radius_nodes,
            "theta_nodes": self.theta_nodes,
        }


@dataclass
class Estimate:
    value: float
    error: float

    def to_dict(self) -> dict:
        return {"value": self.value, "error": self.error}


# ---------------------------------------------------------------------------
# Energy law
# ---------------------------------------------------------------------------

@dataclass
class EnergyLawDensity:
    """
    Density h of u = V² for V ~ f, stored in the variable s = √u.

    `folded` holds (f(s) + f(-s)) / 2, so h(u) = folded(√u)/√u and
    ∫ g(u) h(u) du = 2 ∫ g(s²) folded(s) ds with no singular weight.
    """

    s: np.ndarray
    folded: np.ndarray
    mode: str = "substitution"

    @property
    def u(self) -> np.ndarray:
        return self.s * self.s

    def evaluate(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        root = np.sqrt(np.maximum(u, 0.0))
        with np.errstate(divide="ignore"):
            return np.where(u > 0, np.interp(root, self.s, self.folded, right=0.0) / root, np.inf)

    def mass(self) -> float:
        return 2.0 * float(trapezoid(self.folded, self.s))

    def mean(self) -> float:
        return 2.0 * float(trapezoid(self.s * self.s * self.folded, self.s))

    def cdf(self, u) -> np.ndarray:
        cumulative = 2.0 * cumulative_trapezoid(self.folded, self.s, initial=0.0)
        return np.interp(np.sqrt(np.maximum(np.asarray(u, dtype=float), 0.0)), self.s, cumulative)


def energy_law(f: GridDensity) -> EnergyLawDensity:
    """Law of V² for V ~ f, on a uniform grid in s = √u."""
    positive = f.values > 0
    if not np.any(positive & (np.abs(f.nodes) > 0.5 * f.spacing)):
        raise DegenerateDensityError(f"{f.name} has mass only at v = 0")
    n_half = f.n_points // 2 + 1
    s = np.linspace(0.0, f.v_max, n_half)
    folded = 0.5 * (f.evaluate(s) + f.evaluate(-s))
    near_zero = folded[:3]
    if near_zero.max() > 0 and np.ptp(near_zero) > 0.5 * f.sup_norm():
        logger.warning("%s is not continuous near v = 0 on this grid", f.name)
    return EnergyLawDensity(s=s, folded=folded)


# ---------------------------------------------------------------------------
# Log-partition tables
# ---------------------------------------------------------------------------

class FoldedBase:
    """log Z_1(ρ) = log((f(ρ) + f(-ρ)) / 2)."""

    m = 1

    def __init__(self, f: GridDensity):
        self.f = f

    @property
    def breaks(self) -> tuple:
        """Radii where log Z_1 stops being smooth; the last one bounds its support."""
        tail = self.f.tail_model
        return () if tail is None or tail.support is None else (float(tail.support),)

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.logaddexp(self.f.log_evaluate(rho), self.f.log_evaluate(-rho)) - LOG_2


@dataclass
class LogPartitionTable:
    """log Z_m(f, ρ) on a uniform radius grid, interpolated by a cubic spline."""

    m: int
    rho: np.ndarray
    log_values: np.ndarray

    breaks = ()

    @cached_property
    def _spline(self) -> tuple:
        values = self.log_values
        finite = np.isfinite(values)
        if not np.any(finite):
            return None, 0.0, -1.0
        peak = values[finite].max()
        usable = finite & (values >= peak - 700.0)
        first = int(np.argmax(usable))
        run = np.argmin(usable[first:]) if not usable[first:].all() else usable.size - first
        idx = np.arange(first, first + run)
        x, y = self.rho[idx], values[idx]
        if idx.size < 4:
            return (lambda r: np.interp(r, x, y)), float(x[0]), float(x[-1])
        bc = ((1, 0.0), "not-a-knot") if x[0] == 0.0 else "not-a-knot"
        return CubicSpline(x, y, bc_type=bc), float(x[0]), float(x[-1])

    def __call__(self, rho) -> np.ndarray:
        spline, left, right = self._spline
        rho = np.asarray(rho, dtype=float)
        out = np.full(rho.shape, -np.inf)
        if spline is None:
            return out
        slack = 1e-12 * max(right, 1.0)
        inside = (rho >= left - slack) & (rho <= right + slack)
        out[inside] = spline(np.clip(rho[inside], left, right))
        return out

    def rows(self) -> list:
        return [(self.m, float(r * r), float(z)) for r, z in zip(self.rho, self.log_values)]


def _split_weights(m1: int, m2: int, n_split: int) -> tuple:
    phi, w = gauss_legendre(n_split, 0.0, 0.5 * np.pi)
    cos_phi, sin_phi = np.cos(phi), np.sin(phi)
    log_w = np.log(w) + (m1 - 1) * np.log(cos_phi) + (m2 - 1) * np.log(sin_phi)
    return cos_phi, sin_phi, log_w - logsumexp(log_w)


def _log_split_norm(m1: int, m2: int) -> float:
    """log ∫_0^{π/2} cos^{m1-1}φ · sin^{m2-1}φ dφ."""
    return float(gammaln(0.5 * m1) + gammaln(0.5 * m2) - gammaln(0.5 * (m1 + m2)) - LOG_2)


def _split_edges(first, second, r: np.ndarray) -> np.ndarray:
    """Sorted angles framed by 0 and π/2 where r·cos φ or r·sin φ crosses a break radius."""
    with np.errstate(divide="ignore"):
        angles = [np.zeros_like(r), np.full_like(r, 0.5 * np.pi)]
        angles += [np.arccos(np.minimum(b / r, 1.0)) for b in first.breaks]
        angles += [np.arcsin(np.minimum(b / r, 1.0)) for b in second.breaks]
    return np.sort(np.concatenate(angles, axis=1), axis=1)


def _combine_piecewise(first, second, rho, n_split: int, chunk: int) -> np.ndarray:
    n_pieces = len(first.breaks) + len(second.breaks) + 1
    x, w = gauss_legendre(max(n_split // n_pieces, 16), 0.0, 1.0)
    log_norm = _log_split_norm(first.m, second.m)
    out = np.empty(rho.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        for start in range(0, rho.size, chunk):
            r = rho[start:start + chunk, None]
            edges = _split_edges(first, second, r)
            lo, width = edges[:, :-1, None], np.diff(edges, axis=1)[:, :, None]
            phi = (lo + width * x).reshape(r.shape[0], -1)
            log_w = np.log(width * w).reshape(r.shape[0], -1) - log_norm
            # empty panels sit on φ = 0 or π/2, where m = 1 would give 0·log 0
            if first.m > 1:
                log_w = log_w + (first.m - 1) * np.log(np.cos(phi))
            if second.m > 1:
                log_w = log_w + (second.m - 1) * np.log(np.sin(phi))
            terms = first(r * np.cos(phi)) + second(r * np.sin(phi)) + log_w
            out[start:start + chunk] = logsumexp(terms, axis=1)
    return out


def combine(first, second, rho, n_split: int, chunk: int = 128) -> np.ndarray:
    """
    log Z_{m1+m2}(ρ) from tables for m1 and m2.

    When either factor declares break radii, the φ-quadrature is split at
    every angle where an argument crosses one, so jumps and square-root
    onsets sit on panel edges.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if getattr(first, "breaks", ()) or getattr(second, "breaks", ()):
        return _combine_piecewise(first, second, rho, n_split, chunk)
    cos_phi, sin_phi, log_w = _split_weights(first.m, second.m, n_split)
    out = np.empty(rho.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        for start in range(0, rho.size, chunk):
            r = rho[start:start + chunk, None]
            terms = first(r * cos_phi) + second(r * sin_phi) + log_w
            out[start:start + chunk] = logsumexp(terms, axis=1)
    return out


class PairPartition:
    """log Z_2 at arbitrary radii by direct piecewise quadrature, for a base with declared support."""

    m = 2

    def __init__(self, base: FoldedBase, n_split: int):
        self.base = base
        self.n_split = n_split

    @property
    def breaks(self) -> tuple:
        support = self.base.breaks[-1]
        return (support, float(np.sqrt(2.0)) * support)

    def __call__(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        return combine(self.base, self.base, rho.reshape(-1), self.n_split).reshape(rho.shape)


class LogPartitionBuilder:
    """Memoized binary-doubling construction of log Z_m tables on [0, rho_max]."""

    def __init__(
        self,
        f: GridDensity,
        rho_max: float,
        resolution: Optional[SphereResolution] = None,
        use_cache: bool = False,
    ):
        self.f = f
        self.resolution = resolution or SphereResolution()
        self.rho = np.linspace(0.0, rho_max, self.resolution.radial_nodes)
        self.base = FoldedBase(f)
        self.use_cache = use_cache
        self._tables = {1: self.base}
        self._digest = cache.density_digest(f.values, f.grid.to_dict()) if use_cache else None

    def _compute(self, m: int) -> np.ndarray:
        if (m - 1) in self._tables or m % 2 == 1:
            return combine(self.table(m - 1), self.base, self.rho, self.resolution.split_nodes)
        half = self.table(m // 2)
        return combine(half, half, self.rho, self.resolution.split_nodes)

    def table(self, m: int):
        if m < 1:
            raise SphereError(f"particle count must be positive, got {m}")
        if m in self._tables:
            return self._tables[m]
        values = None
        if self.use_cache:
            values = cache.get_cached_table(
                self._digest, m, float(self.rho[-1]),
                self.resolution.radial_nodes, self.resolution.split_nodes,
            )
        if values is None:
            values = self._compute(m)
            if self.use_cache:
                cache.store_cached_table(
                    self._digest, m, float(self.rho[-1]),
                    self.resolution.radial_nodes, self.resolution.split_nodes, values,
                )
        self._tables[m] = LogPartitionTable(m, self.rho, values)
        return self._tables[m]

    def value(self, m: int, rho, n_split: Optional[int] = None) -> np.ndarray:
        """
        log Z_m at exact radii, from the m-1 table and the base.

        For a base with declared support and m <= 4 no spline is involved:
        Z_2 is re-integrated at every node, so the square-root onsets of
        Z_2 stay on panel edges.
        """
        if m < 2:
            raise SphereError(f"log_partition needs m >= 2, got {m}")
        n_split = n_split or 8 * self.resolution.split_nodes
        if self.base.breaks and m <= 4:
            pair = PairPartition(self.base, self.resolution.split_nodes)
            first, second = {2: (self.base, self.base), 3: (pair, self.base), 4: (pair, pair)}[m]
            return combine(first, second, rho, n_split)
        return combine(self.table(m - 1), self.base, rho, n_split)


def log_partition(
    f: GridDensity,
    m: int,
    u: float,
    resolution: Optional[SphereResolution] = None,
) -> float:
    """log Z_m(f, √u); -inf when u lies outside the support of h^{*m}."""
    if m < 2:
        raise SphereError(f"log_partition needs m >= 2, got {m}")
    if u <= 0:
        raise SphereError(f"total energy must be positive, got {u}")
    root = np.sqrt(u)
    builder = LogPartitionBuilder(f, root * (1.0 + 1e-12), resolution)
    value = float(builder.value(m, [root])[0])
    if not np.isfinite(value):
        logger.warning("h^{*%d}(%g) is below the floor for %s", m, u, f.name)
    return value


def log_partition_fft(f: GridDensity, m: int, u: float, n_cells: int = 2 ** 20) -> float:
    """
    log Z_m(f, √u) through the convolution power h^{*m} on a periodic lattice.

    Cell masses of V² are powered in Fourier space. The period covers
    ±20 standard deviations of the sum, so wrap-around is negligible.
    Accuracy is first order in the cell width; this path is a cross-check.
    """
    if m < 2 or u <= 0:
        raise SphereError(f"need m >= 2 and u > 0, got m={m}, u={u}")
    law = energy_law(f)
    spread = np.sqrt(max(moment(f, 4) - moment(f, 2) ** 2, 1e-12))
    period = 40.0 * np.sqrt(m) * spread + 40.0
    width = period / n_cells
    edges = np.arange(n_cells + 1) * width
    cdf = law.cdf(edges)
    cells = np.diff(cdf)
    powered = np.fft.irfft(np.fft.rfft(cells) ** m, n=n_cells)
    powered = np.clip(powered, 0.0, None) / width
    # cell masses sit at cell centres, so the m-fold sum is shifted by m/2 cells
    offset = 0.5 * m * width
    position = ((u - offset) % period) / width
    density = float(np.interp(position, np.arange(n_cells), powered, period=n_cells))
    if density <= 0:
        return -np.inf
    return float(LOG_2 + np.log(density) - log_sphere_area(m) - 0.5 * (m - 2) * np.log(u))


# ---------------------------------------------------------------------------
# Conditioned tensorisation
# ---------------------------------------------------------------------------

@dataclass
class ConditionedTensor:
    """F_N for a unit-energy base density, with log Z tables for m = N-1 .. N-k_max."""

    base: GridDensity
    n: int
    log_z_n: float
    log_z_table: dict
    resolution: SphereResolution = field(default_factory=SphereResolution)
    k_max: int = 2

    def table(self, m: int) -> LogPartitionTable:
        if m not in self.log_z_table:
            raise MissingTableRowError(
                f"no log Z row for m={m} (N={self.n}, k_max={self.k_max}); extend k_max"
            )
        return self.log_z_table[m]

    def log_weight(self, k: int, s) -> np.ndarray:
        """
        log of Π_k(F_N) / f^{⊗k} at Σv_i² = s.

        [|S^{N-k-1}|/|S^{N-1}|]·(N-s)^{(N-k-2)/2}·N^{-(N-2)/2}·Z_{N-k}(√(N-s))/Z_N(√N),
        and -inf where s >= N.
        """
        n = self.n
        s = np.asarray(s, dtype=float)
        remaining = n - s
        out = np.full(s.shape, -np.inf)
        inside = remaining > 0
        rest = remaining[inside]
        out[inside] = (
            log_sphere_area(n - k) - log_sphere_area(n)
            + 0.5 * (n - k - 2) * np.log(rest)
            - 0.5 * (n - 2) * np.log(n)
            + self.table(n - k)(np.sqrt(rest))
            - self.log_z_n
        )
        return out

    def with_resolution(self, resolution: SphereResolution) -> "ConditionedTensor":
        return replace(self, resolution=resolution)


def _check_unit_energy(f: GridDensity, tol: float = 1e-8):
    m2 = moment(f, 2)
    if abs(m2 - 1.0) > tol or abs(f.mass() - 1.0) > tol:
        raise UnitEnergyError(f"{f.name} has mass {f.mass():.12f} and m2 {m2:.12f}")


def conditioned_tensor(
    f: GridDensity,
    n: int,
    k_max: int = 2,
    resolution: Optional[SphereResolution] = None,
    use_cache: bool = False,
) -> ConditionedTensor:
    """Build F_N with log Z rows for N-k_max .. N-1 and the scalar log Z_N(√N)."""
    if n < 3:
        raise SphereError(f"conditioned tensorisation needs N >= 3, got {n}")
    if not 1 <= k_max <= n - 2:
        raise SphereError(f"k_max must lie in [1, N-2], got {k_max}")
    _check_unit_energy(f)
    resolution = resolution or SphereResolution()
    root = np.sqrt(n)
    builder = LogPartitionBuilder(f, root * (1.0 + 1e-12), resolution, use_cache)
    tables = {m: builder.table(m) for m in range(n - k_max, n)}
    log_z_n = float(builder.value(n, [root])[0])
    if not np.isfinite(log_z_n):
        raise SphereError(f"Z_{n}(f, √{n}) vanishes for {f.name}")
    logger.info("built conditioned tensorisation of %s at N=%d (log Z_N=%.6f)", f.name, n, log_z_n)
    return ConditionedTensor(f, n, log_z_n, tables, resolution, k_max)


def marginal(ct: ConditionedTensor, k: int, points) -> np.ndarray:
    """Π_k(F_N) at k-tuples of velocities (shape (P, k) or (k,)); zero outside Σv² < N."""
    if not 1 <= k <= ct.n - 2:
        raise SphereError(f"marginal order must lie in [1, N-2], got {k}")
    points = np.asarray(points, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    if points.shape[-1] != k:
        raise SphereError(f"expected {k}-tuples, got shape {points.shape}")
    log_f = ct.base.log_evaluate(points).sum(axis=-1)
    with np.errstate(invalid="ignore"):
        values = np.exp(log_f + ct.log_weight(k, np.sum(points * points, axis=-1)))
    values = np.nan_to_num(values, nan=0.0)
    return values[0] if single else values


def _first_marginal_nodes(ct: ConditionedTensor, chi_nodes: int) -> tuple:
    """Nodes v, log f(v) and quadrature weights of Π₁ under v = √N sin χ."""
    root = np.sqrt(ct.n)
    chi_max = np.arcsin(min(1.0, ct.base.support_radius / root))
    chi, w = gauss_legendre(chi_nodes, -chi_max, chi_max)
    v = root * np.sin(chi)
    log_f = ct.base.log_evaluate(v)
    with np.errstate(invalid="ignore"):
        weights = np.exp(log_f + ct.log_weight(1, v * v)) * root * np.cos(chi) * w
    return v, log_f, np.nan_to_num(weights, nan=0.0)


def marginal_mass(ct: ConditionedTensor) -> float:
    _, _, weights = _first_marginal_nodes(ct, ct.resolution.chi_nodes)
    return float(weights.sum())


def marginal_moment(ct: ConditionedTensor, order: float) -> float:
    """M_order(Π₁(F_N)) = ∫ |v|^order Π₁(v) dv."""
    v, _, weights = _first_marginal_nodes(ct, ct.resolution.chi_nodes)
    return float(np.sum(np.abs(v) ** order * weights))


def marginal_exp_moment(ct: ConditionedTensor, a: float, mu: float) -> float:
    """∫ exp(a|v|^mu) Π₁(v) dv."""
    v, _, weights = _first_marginal_nodes(ct, ct.resolution.chi_nodes)
    return float(np.sum(np.exp(a * np.abs(v) ** mu) * weights))


def _entropy_at(ct: ConditionedTensor, chi_nodes: int) -> float:
    _, log_f, weights = _first_marginal_nodes(ct, chi_nodes)
    used = weights > 0
    return float(ct.n * np.sum(weights[used] * log_f[used]) - ct.log_z_n)


def entropy_HN_estimate(ct: ConditionedTensor) -> Estimate:
    if not np.isfinite(moments(ct.base, ks=()).l_log_l):
        raise DensityError(f"{ct.base.name} has divergent L log L norm")
    fine = _entropy_at(ct, ct.resolution.chi_nodes)
    coarse = _entropy_at(ct, ct.resolution.halved().chi_nodes)
    return Estimate(fine, abs(fine - coarse))


def entropy_HN(ct: ConditionedTensor) -> float:
    """H_N(F_N) = N ∫ Π₁ log f − log Z_N(f, √N)."""
    return entropy_HN_estimate(ct).value


def _pair_integral(
    ct: ConditionedTensor,
    kernel: Callable,
    radial_factor: Callable,
    resolution: SphereResolution,
) -> float:
    """∫∫ W(v1²+v2²)·radial_factor·∫ K(P, P∘R_θ) dθ dv, with ρ = √N sin χ."""
    n = ct.n
    root = np.sqrt(n)
    chi_max = np.arcsin(min(1.0, np.sqrt(2.0) * ct.base.support_radius / root))
    chi, w = gauss_legendre(resolution.pair_radius_nodes, 0.0, chi_max)
    rho = root * np.sin(chi)
    # ρ dρ = N sin χ cos χ dχ
    log_jacobian = np.log(n * np.sin(chi) * np.cos(chi))
    weights = np.exp(ct.log_weight(2, rho * rho) + log_jacobian) * w * radial_factor(rho)
    sums = circle_pair_sums(ct.base.log_evaluate, rho, kernel, resolution.theta_nodes)
    return float(np.sum(weights * sums))


def _checked(value: float, error: float, name: str) -> float:
    if value < -max(10.0 * error, 1e-8):
        raise QuadratureError(f"{name} = {value:.3e} is negative beyond tolerance {error:.1e}")
    return value


def entropy_production_DN_estimate(ct: ConditionedTensor, gamma: float) -> Estimate:
    if not 0.0 <= gamma <= 1.0:
        raise SphereError(f"gamma must lie in [0, 1], got {gamma}")
    prefactor = ct.n / (4.0 * np.pi)
    factor = lambda rho: (1.0 + rho * rho) ** gamma
    fine = prefactor * _pair_integral(ct, psi_kernel, factor, ct.resolution)
    coarse = prefactor * _pair_integral(ct, psi_kernel, factor, ct.resolution.halved())
    error = abs(fine - coarse)
    return Estimate(_checked(fine, error, "D_N"), error)


def entropy_production_DN(ct: ConditionedTensor, gamma: float) -> float:
    """D_{N,γ}(F_N) through the two-particle reduction."""
    return entropy_production_DN_estimate(ct, gamma).value


def log_power_integral_estimate(ct: ConditionedTensor, beta: float) -> Estimate:
    if beta <= 0:
        raise SphereError(f"beta must be positive, got {beta}")
    kernel = psi_beta_kernel(beta)
    one = lambda rho: 1.0
    fine = _pair_integral(ct, kernel, one, ct.resolution) / (2.0 * np.pi)
    coarse = _pair_integral(ct, kernel, one, ct.resolution.halved()) / (2.0 * np.pi)
    error = abs(fine - coarse)
    return Estimate(_checked(fine, error, "log-power integral"), error)


def log_power_integral(ct: ConditionedTensor, beta: float) -> float:
    """(1/2π) ∫∫ ψ_β(F_N, F_N∘R_{1,2,θ}) dσ dθ."""
    return log_power_integral_estimate(ct, beta).value


# ---------------------------------------------------------------------------
# Log-scalability
# ---------------------------------------------------------------------------

def check_tail_bounds(f: GridDensity, tail: TailModel, rtol: float = 1e-8):
    """Raise TailBoundViolation at the first node where the declared bounds fail."""
    v = f.nodes
    lower, upper = tail.lower(v), tail.upper(v)
    low_bad = np.nonzero(f.values < lower * (1.0 - rtol))[0]
    if low_bad.size:
        i = int(low_bad[0])
        raise TailBoundViolation(i, float(v[i]), float(f.values[i]), float(lower[i]), "lower")
    high_bad = np.nonzero(f.values > upper * (1.0 + rtol))[0]
    if high_bad.size:
        i = int(high_bad[0])
        raise TailBoundViolation(i, float(v[i]), float(f.values[i]), float(upper[i]), "upper")


def log_scalability_constant(
    ct: ConditionedTensor,
    tail: Optional[TailModel] = None,
    ns: Iterable[int] = (),
) -> float:
    """
    C_F = max(|log C1|, |log C2|) + max(a1, a2) + sup_N |log Z_N(f, √N)| / N.

    The supremum runs over ct.n and any extra particle numbers in `ns`.
    """
    tail = tail or ct.base.tail_model
    if tail is None:
        raise SphereError(f"{ct.base.name} has no declared tail model")
    if tail.c1 <= 0 or tail.c2 <= 0:
        raise SphereError("tail constants C1 and C2 must be positive")
    check_tail_bounds(ct.base, tail)
    z_terms = [abs(ct.log_z_n) / ct.n]
    for n in sorted(set(ns) - {ct.n}):
        z_terms.append(abs(log_partition(ct.base, n, float(n), ct.resolution)) / n)
    return float(
        max(abs(np.log(tail.c1)), abs(np.log(tail.c2))) + max(tail.a1, tail.a2) + max(z_terms)
    )


def uniform_sphere_points(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    points = rng.standard_normal((count, n))
    return np.sqrt(n) * points / np.linalg.norm(points, axis=1, keepdims=True)


def log_scalability_audit(
    ct: ConditionedTensor,
    c_f: float,
    n_samples: int = 10_000,
    seed: int = 0,
) -> float:
    """max |log F_N(v)| / N over random sphere points; at most C_F when log-scalable."""
    rng = np.random.default_rng(seed)
    points = uniform_sphere_points(ct.n, n_samples, rng)
    log_f = ct.base.log_evaluate(points).sum(axis=1) - ct.log_z_n
    worst = float(np.max(np.abs(log_f)) / ct.n)
    if worst > c_f:
        logger.warning("log-scalability audit: %.4f exceeds C_F=%.4f", worst, c_f)
    return worst


# ---------------------------------------------------------------------------
# g-concentration
# ---------------------------------------------------------------------------

@dataclass
class ConcentrationEntry:
    n: int
    window: tuple
    sup_residual: float
    g_deviation: float
    radius: float
    g_at_zero: float
    profile_at_zero: float
    shrunk: bool = False

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "window": list(self.window),
            "sup_residual": self.sup_residual,
            "g_deviation": self.g_deviation,
            "radius": self.radius,
            "g_at_zero": self.g_at_zero,
            "profile_at_zero": self.profile_at_zero,
            "shrunk": self.shrunk,
        }


@dataclass
class ConcentrationProfile:
    """Gaussian candidate g(x, N) = exp(-x²/(2NΣ²))/√(2π) and measured residuals λ_N."""

    sigma2: float
    entries: list = field(default_factory=list)

    @property
    def ns(self) -> list:
        return [e.n for e in self.entries]

    @property
    def residuals(self) -> list:
        return [e.sup_residual for e in self.entries]

    @property
    def decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.residuals, self.residuals[1:]))

    @property
    def g_sup(self) -> float:
        return INV_SQRT_2PI

    def max_residual(self) -> float:
        return max(self.residuals) if self.entries else 0.0

    def to_dict(self) -> dict:
        return {
            "sigma2": self.sigma2,
            "decreasing": self.decreasing,
            "entries": [e.to_dict() for e in self.entries],
        }


def gaussian_candidate(x, n: int, sigma2: float) -> np.ndarray:
    return INV_SQRT_2PI * np.exp(-np.square(x) / (2.0 * n * sigma2))


def _log_energy_density(log_z, m: int, u) -> np.ndarray:
    """log h^{*m}(u) from log Z_m(f, √u); h is the law of V²."""
    return log_z + log_sphere_area(m) + 0.5 * (m - 2) * np.log(u) - LOG_2


def log_profile(ct: ConditionedTensor, m: int, u, sigma2: Optional[float] = None) -> np.ndarray:
    """
    log of Σ√m·h^{*m}(u), the profile g(u-m, m) + λ_m(u), for m = N or a tabled N-k.

    -inf for u <= 0.
    """
    sigma2 = sigma2 if sigma2 is not None else moment(ct.base, 4) - 1.0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.full(u.shape, -np.inf)
    positive = u > 0
    if m != ct.n:
        log_z = ct.table(m)(np.sqrt(u[positive]))
    elif np.allclose(u[positive], ct.n):
        log_z = ct.log_z_n
    else:
        raise MissingTableRowError(f"only u = N is tabled for m = N = {ct.n}")
    out[positive] = 0.5 * np.log(sigma2 * m) + _log_energy_density(log_z, m, u[positive])
    return out


def profile_weight(ct: ConditionedTensor, k: int, s, sigma2: Optional[float] = None) -> np.ndarray:
    """
    Π_k(F_N)/f^{⊗k} at Σv_i² = s, written through the concentration profile:
    √(N/(N-k))·P_{N-k}(N-s)/P_N(N). Zero for s >= N.
    """
    n = ct.n
    s = np.atleast_1d(np.asarray(s, dtype=float))
    log_ratio = (
        0.5 * np.log(n / (n - k))
        + log_profile(ct, n - k, n - s, sigma2)
        - log_profile(ct, n, [float(n)], sigma2)[0]
    )
    return np.exp(log_ratio)


def g_concentration_profile(
    f: GridDensity,
    ns: Sequence[int] = PROFILE_NS,
    resolution: Optional[SphereResolution] = None,
    window_sigmas: float = 6.0,
    radius: Optional[float] = None,
    window_points: int = 801,
) -> ConcentrationProfile:
    """
    Extract Σ√N·h^{*N}(u) = g(u-N, N) + λ_N(u) from the log-partition tables.

    Σ² = m4 - 1; the scaling by Σ√N makes g(0, N) = (2π)^{-1/2}.
    """
    sigma2 = moment(f, 4) - 1.0
    if sigma2 <= 0:
        raise DegenerateDensityError(f"{f.name} has Σ² = {sigma2}")
    sigma = np.sqrt(sigma2)
    profile = ConcentrationProfile(sigma2=float(sigma2))
    for n in ns:
        spread = np.sqrt(n * sigma2)
        lo, hi = max(n - window_sigmas * spread, 1e-9 * n), n + window_sigmas * spread
        builder = LogPartitionBuilder(f, np.sqrt(hi) * (1.0 + 1e-12), resolution)
        u = np.linspace(lo, hi, window_points)
        log_z = builder.table(n)(np.sqrt(u))
        finite = np.isfinite(log_z)
        shrunk = not finite.all()
        if shrunk:
            if not finite.any():
                raise SphereError(f"log Z_{n} is -inf over the whole window")
            u, log_z = u[finite], log_z[finite]
            logger.warning("g-concentration window for N=%d shrunk to [%g, %g]", n, u[0], u[-1])
        log_h = _log_energy_density(log_z, n, u)
        x = u - n
        extracted = sigma * np.sqrt(n) * np.exp(log_h)
        residual = np.abs(extracted - gaussian_candidate(x, n, sigma2))
        r = radius if radius is not None else 5.0 * spread
        inside = np.abs(x) < r
        deviation = np.abs(gaussian_candidate(x[inside], n, sigma2) - INV_SQRT_2PI)
        log_z_exact = float(builder.value(n, [np.sqrt(n)])[0])
        at_zero = sigma * np.sqrt(n) * np.exp(_log_energy_density(log_z_exact, n, float(n)))
        profile.entries.append(ConcentrationEntry(
            n=int(n),
            window=(float(u[0]), float(u[-1])),
            sup_residual=float(residual.max()),
            g_deviation=float(deviation.max()) if deviation.size else 0.0,
            radius=float(r),
            g_at_zero=float(gaussian_candidate(0.0, n, sigma2)),
            profile_at_zero=float(at_zero),
            shrunk=shrunk,
        ))
    if not profile.decreasing:
        logger.info("g-concentration residuals are not decreasing across N=%s", list(ns))
    return profile


# ---------------------------------------------------------------------------
# Log-power constant
# ---------------------------------------------------------------------------

def c_epsilon(eps: float) -> float:
    """sup_{x>=1} log x / x^eps = 1/(e·eps)."""
    if eps <= 0:
        raise SphereError(f"epsilon must be positive, got {eps}")
    return 1.0 / (np.e * eps)


def c_k_beta(k: float, beta: float) -> float:
    """2^{k(1+β)+1} ∫_0^{2π} |cos θ|^{k(1+β)} dθ."""
    p = k * (1.0 + beta)
    cos_integral = 2.0 * np.sqrt(np.pi) * np.exp(gammaln(0.5 * (p + 1.0)) - gammaln(0.5 * p + 1.0))
    return float(2.0 ** (p + 1.0) * cos_integral)


def phi_from_tail(tail: TailModel) -> Callable:
    """Φ with f >= exp(-Φ), from the declared Gaussian lower bound."""
    shift = max(0.0, -np.log(tail.c1))
    return lambda v: shift + tail.a1 * np.square(v)


def concentration_ratio(profile: ConcentrationProfile) -> float:
    """(‖g‖∞ + sup|λ|) / ((2π)^{-1/2} - sup|λ|) over the profiled N."""
    lam = profile.max_residual()
    denominator = INV_SQRT_2PI - lam
    if denominator <= 0:
        raise SphereError(f"residual {lam:.3e} swamps (2π)^(-1/2); concentration too weak")
    return (profile.g_sup + lam) / denominator


def _phi_moments(f: GridDensity, phi: Callable, beta: float, n_radius: int, n_angles: int) -> tuple:
    m_phi = f.integrate(phi(f.nodes) ** (1.0 + beta) * f.values)
    radius = np.sqrt(2.0) * f.support_radius
    rho, w = gauss_legendre(n_radius, 0.0, radius)
    angles = circle_angles(n_angles)
    step = 2.0 * np.pi / n_angles
    ring = step * np.sum(phi(rho[:, None] * np.cos(angles)) ** (1.0 + beta), axis=1)
    pair = step * np.sum(
        f.evaluate(rho[:, None] * np.cos(angles)) * f.evaluate(rho[:, None] * np.sin(angles)),
        axis=1,
    )
    m_avg = float(np.sum(w * rho * ring * pair))
    return float(m_phi), m_avg


def log_power_constant(
    f: GridDensity,
    beta: float,
    k: Optional[float] = None,
    phi: Optional[Callable] = None,
    eps: float = 0.5,
    profile: Optional[ConcentrationProfile] = None,
    resolution: Optional[SphereResolution] = None,
    ratio: Optional[float] = None,
) -> float:
    """
    Closed-form log-power constant C of F_N = f^{⊗N}/Z_N.

    With `k` the power-moment form is used:
        2(C_ε I(f)^{ε/2})^{1+β} + (1 + C_{k,β}) M_{k(1+β)}.
    Otherwise a confinement Φ with f >= e^{-Φ} (default: from the tail model)
    gives 2(C_ε ‖f‖∞^ε)^{1+β} + M_{Φ,β} + M_{avg,Φ,β}.
    An explicit `ratio` replaces the measured concentration ratio; ratio = 1
    is the N → ∞ value.
    """
    if beta <= 0:
        raise SphereError(f"beta must be positive, got {beta}")
    resolution = resolution or SphereResolution()
    if ratio is None:
        profile = profile or g_concentration_profile(f, resolution=resolution)
        ratio = concentration_ratio(profile)
    c_eps = c_epsilon(eps)
    report = moments(f, ks=())
    if k is not None:
        order = k * (1.0 + beta)
        m_order = moment(f, order)
        if not np.isfinite(m_order) or not np.isfinite(report.fisher):
            raise DensityError(f"M_{order:g} or I(f) diverges for {f.name}")
        bracket = 2.0 * (c_eps * report.fisher ** (0.5 * eps)) ** (1.0 + beta) \
            + (1.0 + c_k_beta(k, beta)) * m_order
    else:
        if phi is None:
            if f.tail_model is None:
                raise SphereError(f"{f.name} needs k, Φ, or a declared tail model")
            phi = phi_from_tail(f.tail_model)
        m_phi, m_avg = _phi_moments(
            f, phi, beta, resolution.pair_radius_nodes, resolution.theta_nodes
        )
        if not (np.isfinite(m_phi) and np.isfinite(m_avg)):
            raise DensityError(f"Φ-moments diverge for {f.name}")
        bracket = 2.0 * (c_eps * f.sup_norm() ** eps) ** (1.0 + beta) + m_phi + m_avg
    return float((2.0 ** (1.0 + 2.0 * beta) * np.sqrt(3.0) * ratio * bracket) ** (1.0 / (1.0 + beta)))


def sup_marginal_moment(
    f: GridDensity,
    order: float,
    ns: Iterable[int],
    resolution: Optional[SphereResolution] = None,
) -> float:
    """sup over the listed N of M_order(Π₁(F_N)), together with the N = ∞ value M_order(f)."""
    values = [moment(f, order)]
    for n in ns:
        values.append(marginal_moment(conditioned_tensor(f, n, 1, resolution), order))
    return float(max(values))


# ---------------------------------------------------------------------------
# CSV exchange of log Z tables
# ---------------------------------------------------------------------------

def write_log_z_csv(ct: ConditionedTensor, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["m", "u", "logZ"])
        for m in sorted(ct.log_z_table):
            for row in ct.log_z_table[m].rows():
                writer.writerow([row[0], repr(row[1]), repr(row[2])])
        writer.writerow([ct.n, repr(float(ct.n)), repr(ct.log_z_n)])
    return path


def read_log_z_csv(
    path,
    f: GridDensity,
    n: int,
    resolution: Optional[SphereResolution] = None,
) -> ConditionedTensor:
    """Rebuild a ConditionedTensor from exported (m, u, logZ) rows."""
    _check_unit_energy(f)
    rows = {}
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        next(reader)
        for m, u, z in reader:
            rows.setdefault(int(m), []).append((float(u), float(z)))
    if n not in rows:
        raise MissingTableRowError(f"{path}: no row for m=N={n}")
    log_z_n = dict(rows.pop(n)).get(float(n))
    if log_z_n is None:
        raise MissingTableRowError(f"{path}: no log Z_N entry at u=N")
    tables = {}
    for m, entries in rows.items():
        entries.sort()
        u = np.array([e[0] for e in entries])
        tables[m] = LogPartitionTable(m, np.sqrt(u), np.array([e[1] for e in entries]))
    k_max = n - min(tables)
    if sorted(tables) != list(range(n - k_max, n)):
        raise MissingTableRowError(f"{path}: rows {sorted(tables)} are not contiguous below N={n}")
    return ConditionedTensor(f, n, float(log_z_n), tables, resolution or SphereResolution(), k_max)
