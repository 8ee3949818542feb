"""
Builtin analytic densities.

Each builtin is specified analytically and sampled at run time onto the
active grid, together with its declared tail model. All unit-energy
families are constructed with second moment exactly 1 before sampling.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from density import Grid, GridDensity, DensityError, TailModel, from_values, maxwellian

SQRT_2PI = np.sqrt(2.0 * np.pi)


def _gaussian(v: np.ndarray, mean: float, sigma: float) -> np.ndarray:
    return np.exp(-np.square(v - mean) / (2.0 * sigma * sigma)) / (sigma * SQRT_2PI)


def bimodal(
    mu: float = 1.2,
    sigma: float = 0.3,
    tail_weight: float = 0.0,
    grid: Optional[Grid] = None,
) -> GridDensity:
    """
    Symmetric two-bump density at unit energy.

    (1 - w)·[½N(-mu', sigma'²) + ½N(mu', sigma'²)] + w·M_T', where the primed
    parameters are the unscaled ones divided by the root of the raw second
    moment. A positive tail_weight gives a Gaussian lower bound with a1 = 1/(2T').
    """
    if sigma <= 0:
        raise DensityError(f"sigma must be positive, got {sigma}")
    if not 0.0 <= tail_weight < 1.0:
        raise DensityError(f"tail_weight must lie in [0, 1), got {tail_weight}")
    grid = grid or Grid()
    w = tail_weight
    scale = np.sqrt((1.0 - w) * (mu * mu + sigma * sigma) + w)
    m, s, t = mu / scale, sigma / scale, 1.0 / (scale * scale)
    v = grid.nodes
    values = (1.0 - w) * 0.5 * (_gaussian(v, -m, s) + _gaussian(v, m, s))
    if w > 0:
        values = values + w * _gaussian(v, 0.0, np.sqrt(t))
        c1, a1 = w / np.sqrt(2.0 * np.pi * t), 1.0 / (2.0 * t)
    else:
        c1, a1 = 0.5 / (s * SQRT_2PI) * np.exp(-m * m / (s * s)), 1.0 / (s * s)
    c2 = (1.0 - w) / (s * SQRT_2PI) + (w / np.sqrt(2.0 * np.pi * t) if w > 0 else 0.0)
    tail = TailModel(c1=float(c1), a1=float(a1), c2=float(c2), a2=0.0, mu=1.0, a=0.1)
    name = f"bimodal(mu={mu:g},sigma={sigma:g},tail_weight={w:g})"
    return from_values(values, grid, tail, name=name)


def uniform_energy(grid: Optional[Grid] = None) -> GridDensity:
    """Uniform density on [-√3, √3] (unit energy), with declared compact support."""
    grid = grid or Grid()
    half_width = np.sqrt(3.0)
    c = 1.0 / (2.0 * half_width)
    values = np.where(np.abs(grid.nodes) <= half_width, c, 0.0)
    tail = TailModel(c1=c, a1=0.0, c2=c, a2=0.0, support=float(half_width))
    return from_values(values, grid, tail, name="uniform_energy")


def two_temperature(
    T1: float = 0.5,
    weight: float = 0.5,
    grid: Optional[Grid] = None,
) -> GridDensity:
    """weight·M_T1 + (1 - weight)·M_T2 with T2 fixed by unit energy."""
    if not 0.0 < weight < 1.0:
        raise DensityError(f"weight must lie in (0, 1), got {weight}")
    T2 = (1.0 - weight * T1) / (1.0 - weight)
    if T1 <= 0 or T2 <= 0:
        raise DensityError(f"no unit-energy mixture with T1={T1}, weight={weight}")
    grid = grid or Grid()
    v = grid.nodes
    values = weight * _gaussian(v, 0.0, np.sqrt(T1)) + (1 - weight) * _gaussian(v, 0.0, np.sqrt(T2))
    w_hot, t_hot = (weight, T1) if T1 >= T2 else (1 - weight, T2)
    tail = TailModel(
        c1=float(w_hot / np.sqrt(2.0 * np.pi * t_hot)),
        a1=float(1.0 / (2.0 * t_hot)),
        c2=float(weight / np.sqrt(2.0 * np.pi * T1) + (1 - weight) / np.sqrt(2.0 * np.pi * T2)),
        a2=0.0,
        mu=1.0,
        a=0.1,
    )
    return from_values(values, grid, tail, name=f"two_temperature(T1={T1:g},weight={weight:g})")


def random_mixture(seed: int, grid: Optional[Grid] = None, max_components: int = 4) -> GridDensity:
    """Random Gaussian mixture, used for property sweeps."""
    grid = grid or Grid()
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, max_components + 1))
    weights = rng.dirichlet(np.ones(n))
    means = rng.uniform(-2.0, 2.0, n)
    sigmas = rng.uniform(0.3, 1.5, n)
    v = grid.nodes
    values = sum(w * _gaussian(v, m, s) for w, m, s in zip(weights, means, sigmas))
    return from_values(values, grid, name=f"random_mixture(seed={seed})")


@dataclass
class BuiltinDensity:
    name: str
    builder: Callable[..., GridDensity]
    description: str
    defaults: dict = field(default_factory=dict)

    def build(self, grid: Optional[Grid] = None, **params) -> GridDensity:
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise DensityError(f"unknown parameters for {self.name}: {sorted(unknown)}")
        merged = {**self.defaults, **params}
        return self.builder(grid=grid, **merged)


BUILTIN_DENSITIES = {
    "maxwellian": BuiltinDensity(
        "maxwellian", lambda grid=None, T=1.0: maxwellian(T, grid),
        "Centred Maxwellian M_T", {"T": 1.0},
    ),
    "bimodal": BuiltinDensity(
        "bimodal", bimodal,
        "Two Gaussian bumps at ±mu with an optional Maxwellian admixture",
        {"mu": 1.2, "sigma": 0.3, "tail_weight": 0.0},
    ),
    "uniform_energy": BuiltinDensity(
        "uniform_energy", uniform_energy, "Uniform on [-√3, √3]", {},
    ),
    "two_temperature": BuiltinDensity(
        "two_temperature", two_temperature,
        "Mixture of two Maxwellians at unit energy", {"T1": 0.5, "weight": 0.5},
    ),
    "random_mixture": BuiltinDensity(
        "random_mixture", random_mixture, "Random Gaussian mixture", {"seed": 0, "max_components": 4},
    ),
}


def make_density(name: str, grid: Optional[Grid] = None, **params) -> GridDensity:
    """Build a registered density by name."""
    if name not in BUILTIN_DENSITIES:
        raise DensityError(f"unknown builtin density '{name}', choose from {sorted(BUILTIN_DENSITIES)}")
    return BUILTIN_DENSITIES[name].build(grid=grid, **params)
