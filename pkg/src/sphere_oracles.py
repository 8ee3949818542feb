"""
Brute-force references for the sphere functionals.

Direct angular quadrature on S²(√u) and S³(√u), and Monte Carlo over the
uniform measure on S^{N-1}(√N) for any N. These share nothing with the
log-partition construction except the density evaluator.
"""

import numpy as np

from density import GridDensity
from quadrature import circle_angles, gauss_legendre, psi_beta_kernel, psi_kernel
from sphere import uniform_sphere_points


def _s2_nodes(radius: float, n_polar: int, n_azimuth: int) -> tuple:
    """Points of S²(radius) and normalized weights (z = cos θ Gauss-Legendre, φ trapezoid)."""
    z, wz = gauss_legendre(n_polar, -1.0, 1.0)
    phi = circle_angles(n_azimuth)
    ring = np.sqrt(1.0 - z * z)[:, None]
    polar = np.broadcast_to(z[:, None], (n_polar, n_azimuth))
    points = radius * np.stack([ring * np.cos(phi), ring * np.sin(phi), polar], axis=-1)
    weights = (wz[:, None] * np.full(n_azimuth, 2.0 * np.pi / n_azimuth)) / (4.0 * np.pi)
    return points.reshape(-1, 3), weights.reshape(-1)


def _log_tensor(f: GridDensity, points: np.ndarray) -> np.ndarray:
    return f.log_evaluate(points).sum(axis=-1)


def log_partition_n3(f: GridDensity, u: float, n_polar: int = 2048, n_azimuth: int = 2048) -> float:
    """log Z_3(f, √u) by tensor quadrature on the 2-sphere."""
    points, weights = _s2_nodes(np.sqrt(u), n_polar, n_azimuth)
    return float(np.log(np.sum(weights * np.exp(_log_tensor(f, points)))))


def _panels(edges: np.ndarray, n: int, smooth: bool = True) -> tuple:
    """
    Nodes and weights on consecutive panels between `edges` (last axis).

    With `smooth`, each panel is mapped through x = a + (b - a)(3s² - 2s³)
    before Gauss-Legendre in s; the map flattens square-root behaviour at
    both panel ends.
    """
    s, w = gauss_legendre(n, 0.0, 1.0)
    lo = edges[..., :-1, None]
    width = np.diff(edges, axis=-1)[..., None]
    if smooth:
        nodes = lo + width * (3.0 * s * s - 2.0 * s ** 3)
        weights = width * 6.0 * s * (1.0 - s) * w
    else:
        nodes, weights = lo + width * s, width * w
    shape = edges.shape[:-1] + (-1,)
    return nodes.reshape(shape), weights.reshape(shape)


def log_partition_n4(f: GridDensity, u: float, n_nodes: int = 128, chunk: int = 8) -> float:
    """
    log Z_4(f, √u) by hyperspherical quadrature on S³.

    x = r(cos ψ, sin ψ·z, sin ψ·√(1-z²)·cos φ, sin ψ·√(1-z²)·sin φ),
    dσ = sin²ψ dψ dz dφ / (2π²). With a declared support S every
    coordinate is confined to [-S, S]; the ψ-, z- and φ-ranges are cut to
    that set and split where an edge appears or vanishes.
    """
    r = np.sqrt(u)
    tail = f.tail_model
    support = np.inf if tail is None or tail.support is None else float(tail.support)
    with np.errstate(divide="ignore"):
        first = np.arccos(min(support / r, 1.0))
        onsets = [np.arcsin(min(b / r, 1.0)) for b in (support, np.sqrt(2.0) * support)]
    psi_edges = np.unique(np.clip([first, np.pi - first] + onsets + [np.pi - a for a in onsets], first, np.pi - first))
    if psi_edges.size < 2:
        return -np.inf
    psi, wpsi = _panels(psi_edges, n_nodes)
    total = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        for start in range(0, psi.size, chunk):
            p = psi[start:start + chunk, None]
            reach = r * np.sin(p)
            limit = np.minimum(support / reach, 1.0)
            inner = np.minimum(np.sqrt(np.maximum(1.0 - (support / reach) ** 2, 0.0)), limit)
            empty = np.minimum(np.sqrt(np.maximum(1.0 - 2.0 * (support / reach) ** 2, 0.0)), limit)
            z, wz = _panels(np.concatenate([-limit, -inner, -empty, empty, inner, limit], axis=1), n_nodes // 2)
            ring = reach * np.sqrt(1.0 - z * z)
            ratio = np.minimum(support / ring, 1.0)
            t_edges = np.stack([np.arccos(ratio), np.maximum(np.arcsin(ratio), np.arccos(ratio))], axis=-1)
            t, wt = _panels(t_edges, n_nodes, smooth=False)
            phi = np.concatenate([t + 0.5 * np.pi * q for q in range(4)], axis=-1)
            wphi = np.concatenate([wt] * 4, axis=-1)
            x0 = r * np.cos(p)[:, :, None]
            x1 = (reach * z)[:, :, None]
            x2 = ring[:, :, None] * np.cos(phi)
            x3 = ring[:, :, None] * np.sin(phi)
            log_t = f.log_evaluate(x0) + f.log_evaluate(x1) + f.log_evaluate(x2) + f.log_evaluate(x3)
            w = (wpsi[start:start + chunk, None] * np.sin(p) ** 2)[:, :, None] * wz[:, :, None] * wphi
            total += float(np.sum(w * np.exp(log_t)))
    return float(np.log(total / (2.0 * np.pi ** 2)))


def entropy_n3(f: GridDensity, n_polar: int = 2048, n_azimuth: int = 2048) -> float:
    """H_3(F_3) = ∫ F log F dσ on S²(√3)."""
    points, weights = _s2_nodes(np.sqrt(3.0), n_polar, n_azimuth)
    log_t = _log_tensor(f, points)
    log_z = np.log(np.sum(weights * np.exp(log_t)))
    density = np.exp(log_t - log_z)
    used = density > 0
    return float(np.sum(weights[used] * density[used] * (log_t[used] - log_z)))


def first_marginal_expectation_n3(
    f: GridDensity,
    g,
    n_polar: int = 2048,
    n_azimuth: int = 2048,
) -> float:
    """E_{F_3}[g(v1)] by quadrature on S²(√3)."""
    points, weights = _s2_nodes(np.sqrt(3.0), n_polar, n_azimuth)
    density = np.exp(_log_tensor(f, points))
    density /= np.sum(weights * density)
    return float(np.sum(weights * density * g(points[:, 0])))


def monte_carlo_pair_functional(
    f: GridDensity,
    n: int,
    log_z_n: float,
    kind: str = "dissipation",
    gamma: float = 0.0,
    beta: float = 1.0,
    n_samples: int = 200_000,
    seed: int = 0,
) -> tuple:
    """
    Monte Carlo estimate (mean, standard error) over uniform v on S^{N-1}(√N), θ ~ U(-π, π).

    kind="dissipation": D_{N,γ} = (N/2)·E[(1+v1²+v2²)^γ ψ(F(v), F(R_θ v))]
    kind="log_power":   E[ψ_β(F(v), F(R_θ v))]
    """
    rng = np.random.default_rng(seed)
    points = uniform_sphere_points(n, n_samples, rng)
    theta = rng.uniform(-np.pi, np.pi, n_samples)
    v1, v2 = points[:, 0], points[:, 1]
    r1 = v1 * np.cos(theta) + v2 * np.sin(theta)
    r2 = -v1 * np.sin(theta) + v2 * np.cos(theta)
    rest = f.log_evaluate(points[:, 2:]).sum(axis=1) - log_z_n
    log_before = f.log_evaluate(v1) + f.log_evaluate(v2) + rest
    log_after = f.log_evaluate(r1) + f.log_evaluate(r2) + rest
    if kind == "dissipation":
        samples = 0.5 * n * (1.0 + v1 * v1 + v2 * v2) ** gamma * psi_kernel(log_before, log_after)
    elif kind == "log_power":
        samples = psi_beta_kernel(beta)(log_before, log_after)
    else:
        raise ValueError(f"unknown pair functional '{kind}'")
    return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(n_samples))
