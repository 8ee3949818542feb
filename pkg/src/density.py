"""
One-dimensional probability densities on a uniform symmetric velocity grid.

Quadrature is the composite trapezoid rule on the grid. Logarithms are taken
with a positivity floor and 0·log 0 is read as 0.
"""

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import CubicSpline
from scipy.special import erfc

from config import DEFAULT_N_POINTS, DEFAULT_V_MAX, DENSITY_FLOOR, TOL_MASS

logger = logging.getLogger(__name__)

LOG_FLOOR = float(np.log(DENSITY_FLOOR))


class DensityError(ValueError):
    """Invalid density samples."""


class GridError(DensityError):
    """Grid is not uniform, symmetric, or wide enough."""


class DivergenceError(DensityError):
    """A functional is infinite for the given pair of densities."""


class DegenerateDensityError(DensityError):
    """Density has no spread (all mass at the origin)."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [-v_max, v_max]."""

    v_max: float = DEFAULT_V_MAX
    n_points: int = DEFAULT_N_POINTS

    def __post_init__(self):
        if self.v_max <= 0:
            raise GridError(f"v_max must be positive, got {self.v_max}")
        if self.n_points < 3:
            raise GridError(f"n_points must be at least 3, got {self.n_points}")

    @property
    def v_min(self) -> float:
        return -self.v_max

    @property
    def spacing(self) -> float:
        return 2.0 * self.v_max / (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(-self.v_max, self.v_max, self.n_points)

    def to_dict(self) -> dict:
        return {"v_max": self.v_max, "n_points": self.n_points}


@dataclass(frozen=True)
class TailModel:
    """
    Declared analytic tail bounds C1·exp(-a1 v²) <= f(v) <= C2·exp(a2 v²).

    `mu` and `a` are the default exponential-moment parameters of the density
    and `support` an optional declared compact support [-support, support].
    """

    c1: float
    a1: float
    c2: float
    a2: float
    mu: Optional[float] = None
    a: Optional[float] = None
    support: Optional[float] = None

    def lower(self, v: np.ndarray) -> np.ndarray:
        return self.c1 * np.exp(-self.a1 * np.square(v))

    def upper(self, v: np.ndarray) -> np.ndarray:
        return self.c2 * np.exp(self.a2 * np.square(v))

    def scaled(self, s: float) -> "TailModel":
        """Tail bounds of v -> s·f(s·v)."""
        return TailModel(
            c1=self.c1 * s,
            a1=self.a1 * s * s,
            c2=self.c2 * s,
            a2=self.a2 * s * s,
            mu=self.mu,
            a=self.a,
            support=None if self.support is None else self.support / s,
        )

    def to_dict(self) -> dict:
        data = {"C1": self.c1, "a1": self.a1, "C2": self.c2, "a2": self.a2,
                "mu": self.mu, "a": self.a}
        if self.support is not None:
            data["support"] = self.support
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "TailModel":
        return cls(
            c1=float(data["C1"]),
            a1=float(data["a1"]),
            c2=float(data["C2"]),
            a2=float(data["a2"]),
            mu=None if data.get("mu") is None else float(data["mu"]),
            a=None if data.get("a") is None else float(data["a"]),
            support=None if data.get("support") is None else float(data["support"]),
        )


@dataclass
class GridDensity:
    """Non-negative density samples on a Grid, with an optional declared tail model."""

    grid: Grid
    values: np.ndarray
    tail_model: Optional[TailModel] = None
    name: str = "density"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_points,):
            raise DensityError(
                f"expected {self.grid.n_points} samples, got shape {self.values.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise DensityError("density samples must be finite")
        if np.any(self.values < 0):
            raise DensityError(f"negative density sample {self.values.min():.3e}")

    @property
    def v_min(self) -> float:
        return self.grid.v_min

    @property
    def v_max(self) -> float:
        return self.grid.v_max

    @property
    def n_points(self) -> int:
        return self.grid.n_points

    @property
    def spacing(self) -> float:
        return self.grid.spacing

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def integrate(self, integrand: np.ndarray) -> float:
        return float(trapezoid(integrand, dx=self.spacing))

    def mass(self) -> float:
        return self.integrate(self.values)

    def normalized(self) -> "GridDensity":
        total = self.mass()
        if total <= 0:
            raise DensityError("density has zero mass")
        return replace(self, values=self.values / total)

    def log_values(self) -> np.ndarray:
        return np.log(np.maximum(self.values, DENSITY_FLOOR))

    @property
    def support_radius(self) -> float:
        """Largest |v| at which the density may be positive."""
        positive = np.nonzero(self.values > DENSITY_FLOOR)[0]
        if positive.size == 0:
            return 0.0
        nodes = self.nodes
        radius = float(max(abs(nodes[positive[0]]), abs(nodes[positive[-1]])))
        if self.tail_model is not None and self.tail_model.support is not None:
            radius = min(max(radius, self.tail_model.support), self.v_max)
        return radius

    @cached_property
    def _log_spline(self) -> tuple:
        positive = np.nonzero(self.values > DENSITY_FLOOR)[0]
        if positive.size < 4:
            raise DegenerateDensityError("fewer than four positive samples")
        lo, hi = positive[0], positive[-1]
        nodes = self.nodes[lo:hi + 1]
        spline = CubicSpline(nodes, self.log_values()[lo:hi + 1])
        left, right = float(nodes[0]), float(nodes[-1])
        if self.tail_model is not None and self.tail_model.support is not None:
            support = self.tail_model.support
            left, right = max(-support, self.v_min), min(support, self.v_max)
        return spline, left, right

    def log_evaluate(self, x) -> np.ndarray:
        """Log-density at arbitrary points; -inf outside the effective support."""
        spline, left, right = self._log_spline
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape, -np.inf)
        inside = (x >= left) & (x <= right)
        out[inside] = spline(x[inside])
        return out

    def evaluate(self, x) -> np.ndarray:
        return np.exp(self.log_evaluate(x))

    def sup_norm(self) -> float:
        return float(self.values.max())


@dataclass
class MomentReport:
    mass: float
    m2: float
    m4: float
    m2k: dict = field(default_factory=dict)
    m_exp: Optional[float] = None
    fisher: float = 0.0
    l_log_l: float = 0.0
    flags: list = field(default_factory=list)
    divergent: list = field(default_factory=list)

    def is_finite(self, name: str) -> bool:
        return name not in self.divergent

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "m2": self.m2,
            "m4": self.m4,
            "m2k": {str(k): v for k, v in self.m2k.items()},
            "m_exp": self.m_exp,
            "fisher": self.fisher,
            "l_log_l": self.l_log_l,
            "flags": list(self.flags),
            "divergent": list(self.divergent),
        }


def from_values(
    values: np.ndarray,
    grid: Grid,
    tail_model: Optional[TailModel] = None,
    name: str = "density",
) -> GridDensity:
    """Wrap raw samples and renormalize them to unit trapezoid mass."""
    return GridDensity(grid, np.clip(values, 0.0, None), tail_model, name).normalized()


def maxwellian(T: float, grid: Optional[Grid] = None) -> GridDensity:
    """Centred Maxwellian M_T sampled on the grid and renormalized."""
    if T <= 0:
        raise DensityError(f"temperature must be positive, got {T}")
    grid = grid or Grid()
    truncated = float(erfc(grid.v_max / np.sqrt(2.0 * T)))
    if truncated > TOL_MASS:
        raise GridError(
            f"grid [-{grid.v_max}, {grid.v_max}] loses mass {truncated:.2e} of M_{T}"
        )
    v = grid.nodes
    values = np.exp(-v * v / (2.0 * T)) / np.sqrt(2.0 * np.pi * T)
    c = 1.0 / np.sqrt(2.0 * np.pi * T)
    tail = TailModel(c1=c, a1=1.0 / (2.0 * T), c2=c, a2=0.0)
    return from_values(values, grid, tail, name=f"maxwellian(T={T:g})")


def _check_same_grid(f: GridDensity, g: GridDensity):
    if f.grid != g.grid:
        raise GridError(f"grid mismatch: {f.grid} vs {g.grid}")


def relative_entropy(f: GridDensity, g: GridDensity) -> float:
    """H(f|g) = ∫ f (log f - log g) dv."""
    _check_same_grid(f, g)
    uncovered = f.values * (g.values <= DENSITY_FLOOR)
    if f.integrate(uncovered) > 1e-14:
        raise DivergenceError(
            f"{f.name} carries mass {f.integrate(uncovered):.2e} where {g.name} vanishes"
        )
    positive = f.values > 0
    integrand = np.zeros_like(f.values)
    integrand[positive] = f.values[positive] * (
        np.log(np.maximum(f.values[positive], DENSITY_FLOOR))
        - np.log(np.maximum(g.values[positive], DENSITY_FLOOR))
    )
    if np.array_equal(f.values, g.values):
        return 0.0
    return f.integrate(integrand)


def l1_distance(f: GridDensity, g: GridDensity) -> float:
    _check_same_grid(f, g)
    return f.integrate(np.abs(f.values - g.values))


def pinsker_gap(f: GridDensity, g: GridDensity) -> tuple:
    """Return (H(f|g), ½‖f - g‖₁²)."""
    entropy = relative_entropy(f, g)
    distance = l1_distance(f, g)
    return entropy, 0.5 * distance * distance


def moment(f: GridDensity, p: float) -> float:
    """Absolute moment ∫ |v|^p f dv."""
    if p < 0:
        raise DensityError(f"moment order must be nonnegative, got {p}")
    return f.integrate(np.abs(f.nodes) ** p * f.values)


def fisher_information(f: GridDensity) -> float:
    """I(f) = ∫ (f')² / f, with central differences and the positivity floor."""
    derivative = np.gradient(f.values, f.spacing, edge_order=2)
    return f.integrate(derivative * derivative / np.maximum(f.values, DENSITY_FLOOR))


def l_log_l_norm(f: GridDensity) -> float:
    positive = f.values > 0
    integrand = np.zeros_like(f.values)
    integrand[positive] = f.values[positive] * np.abs(np.log(f.values[positive]))
    return f.integrate(integrand)


def _top_decade_share(f: GridDensity, weights: np.ndarray) -> float:
    total = f.integrate(weights * f.values)
    if total <= 0:
        return 0.0
    top = np.abs(f.nodes) >= 0.9 * f.v_max
    return f.integrate(np.where(top, weights * f.values, 0.0)) / total


def exp_moment_diverges(tail: Optional[TailModel], a: float, mu: float) -> bool:
    """True when the declared Gaussian lower bound makes ∫ e^{a|v|^mu} f infinite."""
    if tail is None or tail.support is not None:
        return False
    return mu > 2 or (mu == 2 and a >= tail.a1)


def moments(
    f: GridDensity,
    ks: Sequence[int] = (1, 2),
    exp_params: Optional[tuple] = None,
) -> MomentReport:
    """
    Quadrature moments of f.

    Args:
        f: density on its grid
        ks: orders k for which m_2k is reported
        exp_params: optional (a, mu) for m_exp = ∫ exp(a|v|^mu) f

    Returns:
        MomentReport, with coarse-grid and divergence flags
    """
    if any(k < 0 for k in ks):
        raise DensityError(f"moment orders must be nonnegative, got {list(ks)}")
    v = f.nodes
    mass = f.mass()
    report = MomentReport(
        mass=mass,
        m2=moment(f, 2),
        m4=moment(f, 4),
        fisher=fisher_information(f),
        l_log_l=l_log_l_norm(f),
    )
    for k in ks:
        report.m2k[k] = moment(f, 2 * k)
        if _top_decade_share(f, np.abs(v) ** (2 * k)) > 0.1:
            report.flags.append(f"coarse_grid:m{2 * k}")
            logger.warning("grid too coarse for m%d of %s", 2 * k, f.name)
    if exp_params is not None:
        a, mu = exp_params
        weights = np.exp(a * np.abs(v) ** mu)
        report.m_exp = f.integrate(weights * f.values)
        if exp_moment_diverges(f.tail_model, a, mu):
            report.divergent.append("m_exp")
        elif _top_decade_share(f, weights) > 0.1:
            report.flags.append("coarse_grid:m_exp")
            logger.warning("grid too coarse for exp moment of %s", f.name)
    if mass <= 0 or report.m2 <= 0:
        raise DegenerateDensityError(f"{f.name} has mass {mass} and m2 {report.m2}")
    return report


def normalize_unit_energy(f: GridDensity, max_iter: int = 5) -> GridDensity:
    """Rescale v -> √m2·f(√m2·v) until mass and second moment are 1."""
    current = f.normalized()
    m2 = moment(current, 2)
    if m2 <= DENSITY_FLOOR:
        raise DegenerateDensityError(f"{f.name} is concentrated at the origin")
    if abs(m2 - 1.0) < 1e-12:
        return current
    v = f.nodes
    for _ in range(max_iter):
        s = np.sqrt(m2)
        spline = CubicSpline(v, current.values, extrapolate=False)
        resampled = np.nan_to_num(s * spline(s * v), nan=0.0)
        tail = None if current.tail_model is None else current.tail_model.scaled(s)
        current = from_values(resampled, f.grid, tail, name=f.name)
        m2 = moment(current, 2)
        if abs(m2 - 1.0) < 1e-12:
            break
    return current


def mixture(f1: GridDensity, f2: GridDensity, alpha: float) -> GridDensity:
    """alpha·f1 + (1 - alpha)·f2 on the shared grid."""
    _check_same_grid(f1, f2)
    return GridDensity(
        f1.grid,
        alpha * f1.values + (1.0 - alpha) * f2.values,
        name=f"mixture({f1.name},{f2.name})",
    )


def write_density_csv(f: GridDensity, path) -> Path:
    """Write (v, f) rows, plus a `.tail.json` sidecar when a tail model is declared."""
    path = Path(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["v", "f"])
        for v, value in zip(f.nodes, f.values):
            writer.writerow([repr(float(v)), repr(float(value))])
    if f.tail_model is not None:
        sidecar = path.with_suffix(".tail.json")
        sidecar.write_text(json.dumps(f.tail_model.to_dict(), indent=2))
    return path


def read_density_csv(path, tail_path=None, name: Optional[str] = None) -> GridDensity:
    """Read a (v, f) CSV on a uniform symmetric grid and renormalize it."""
    path = Path(path)
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        if [h.strip().lower() for h in header[:2]] != ["v", "f"]:
            raise DensityError(f"{path}: expected header 'v,f', got {header}")
        rows = [(float(r[0]), float(r[1])) for r in reader if r]
    v = np.array([r[0] for r in rows])
    values = np.array([r[1] for r in rows])
    if v.size < 3:
        raise GridError(f"{path}: need at least three grid rows")
    if abs(v[0] + v[-1]) > 1e-9 * abs(v[-1]):
        raise GridError(f"{path}: grid is not symmetric about 0")
    steps = np.diff(v)
    if np.max(np.abs(steps - steps.mean())) > 1e-9 * abs(steps.mean()):
        raise GridError(f"{path}: grid is not uniform")
    grid = Grid(v_max=float(v[-1]), n_points=int(v.size))
    tail_path = Path(tail_path) if tail_path else path.with_suffix(".tail.json")
    tail = None
    if tail_path.exists():
        tail = TailModel.from_dict(json.loads(tail_path.read_text()))
    return from_values(values, grid, tail, name=name or path.stem)
