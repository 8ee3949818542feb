"""
Shared quadrature helpers: Gauss-Legendre rules, sphere areas, and the
rotation-averaged pair integrals behind every dissipation-type functional.

A pair functional of the form

    ∫∫ w(v1² + v2²) ∫ K(P(v1, v2), P(v1(θ), v2(θ))) dθ dv1 dv2,   P = f ⊗ f,

is evaluated in polar coordinates (ρ, α). A rotation by θ shifts α, so on a
uniform α-grid the θ-integral at fixed ρ becomes the all-pairs sum
(2π/n)² Σ_j Σ_m K(P_j, P_m) over the circle of radius ρ.
"""

from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import gammaln, roots_legendre

from config import DENSITY_FLOOR

LOG_FLOOR = float(np.log(DENSITY_FLOOR))


@lru_cache(maxsize=64)
def _legendre(n: int) -> tuple:
    x, w = roots_legendre(n)
    return x, w


def gauss_legendre(n: int, a: float, b: float) -> tuple:
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    x, w = _legendre(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def log_sphere_area(n: int) -> float:
    """log |S^{n-1}|, the area of the unit sphere in R^n."""
    return float(np.log(2.0) + 0.5 * n * np.log(np.pi) - gammaln(0.5 * n))


def circle_angles(n: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(n) / n


def psi_kernel(log_x: np.ndarray, log_y: np.ndarray) -> np.ndarray:
    """ψ(x, y) = (x - y)(log x - log y) from log-values, with floored logs."""
    x, y = np.exp(log_x), np.exp(log_y)
    return (x - y) * (np.maximum(log_x, LOG_FLOOR) - np.maximum(log_y, LOG_FLOOR))


def psi_beta_kernel(beta: float) -> Callable:
    """ψ_β(x, y) = |x - y|·|log x - log y|^{1+β}."""

    def kernel(log_x: np.ndarray, log_y: np.ndarray) -> np.ndarray:
        x, y = np.exp(log_x), np.exp(log_y)
        gap = np.abs(np.maximum(log_x, LOG_FLOOR) - np.maximum(log_y, LOG_FLOOR))
        return np.abs(x - y) * gap ** (1.0 + beta)

    return kernel


def circle_pair_sums(
    log_f: Callable,
    radii: np.ndarray,
    kernel: Callable,
    n_angles: int,
    chunk: int = 16,
) -> np.ndarray:
    """
    S(ρ) = ∫_0^{2π} dα ∫_0^{2π} dθ K(P(α), P(α - θ)) on each radius.

    P(α) = f(ρ cos α) f(ρ sin α); returns one value per radius.
    """
    alpha = circle_angles(n_angles)
    cos_a, sin_a = np.cos(alpha), np.sin(alpha)
    step = 2.0 * np.pi / n_angles
    out = np.empty(len(radii))
    for start in range(0, len(radii), chunk):
        r = np.asarray(radii[start:start + chunk])[:, None]
        log_p = log_f(r * cos_a) + log_f(r * sin_a)
        block = kernel(log_p[:, :, None], log_p[:, None, :])
        out[start:start + chunk] = step * step * block.sum(axis=(1, 2))
    return out
