"""
Kac-Boltzmann Solver Evaluation

Equilibrium residual, conservation and the H-theorem over a bimodal run,
calibration of the dissipation prefactor, dt-convergence, and a randomized
Pinsker sweep.

Targets: ‖Q(M_1)‖₁ <= 1e-6; mass/energy drift <= 1e-10; H non-increasing
(slack 1e-10 per step); prefactor within 1%; dt-halving change <= 1e-6 in L¹;
Pinsker holds for every pair.
"""

import sys
import time
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import numpy as np

from boltzmann import SolverConfig, calibrate_dissipation_prefactor, collision_Q, default_dt, solve
from densities import bimodal, random_mixture
from density import Grid, l1_distance, maxwellian, pinsker_gap

EQUILIBRIUM_TOLERANCE = 1e-6
DRIFT_TOLERANCE = 1e-10
CALIBRATION_TOLERANCE = 0.01
DT_CONVERGENCE_TOLERANCE = 1e-6


def evaluate_equilibrium(gammas=(0.0, 0.5, 1.0)) -> dict:
    f = maxwellian(1.0)
    residuals = {str(g): f.integrate(np.abs(collision_Q(f, g, correct=False))) for g in gammas}
    return {
        "residuals": residuals,
        "max_residual": max(residuals.values()),
        "meets_target": max(residuals.values()) <= EQUILIBRIUM_TOLERANCE,
    }


def evaluate_trajectory(t_end: float = 5.0) -> dict:
    """Conservation, monotone H and the calibrated prefactor along a γ = 0 run."""
    start = time.perf_counter()
    f0 = bimodal()
    times = list(np.linspace(0.0, t_end, 11))
    trajectory = solve(f0, SolverConfig(t_end=t_end, gamma=0.0, sample_times=times))
    mass_drift = float(np.max(np.abs(np.asarray(trajectory.mass) - 1.0)))
    energy_drift = float(np.max(np.abs(np.asarray(trajectory.energy) - 1.0)))
    h_steps = np.diff(trajectory.step_H)
    calibration = calibrate_dissipation_prefactor(trajectory)
    return {
        "mass_drift": mass_drift,
        "energy_drift": energy_drift,
        "max_h_increase": float(h_steps.max()),
        "h_ratio": trajectory.H[-1] / trajectory.H[0],
        "calibration": calibration.to_dict(),
        "meets_conservation_target": max(mass_drift, energy_drift) <= DRIFT_TOLERANCE,
        "meets_h_target": bool(np.all(h_steps <= 1e-10)),
        "meets_calibration_target": calibration.relative_error <= CALIBRATION_TOLERANCE,
        "runtime": time.perf_counter() - start,
    }


def evaluate_dt_convergence(t_end: float = 1.0) -> dict:
    f0 = bimodal()
    dt = default_dt(f0, 0.0)
    coarse = solve(f0, SolverConfig(t_end=t_end, dt=dt, dissipation=False, sample_times=[t_end]))
    fine = solve(f0, SolverConfig(t_end=t_end, dt=dt / 2, dissipation=False, sample_times=[t_end]))
    change = l1_distance(coarse.densities[-1], fine.densities[-1])
    return {"dt": dt, "l1_change": change, "meets_target": change <= DT_CONVERGENCE_TOLERANCE}


def evaluate_pinsker(pairs: int = 100, seed: int = 0) -> dict:
    """H(f|g) >= ½‖f - g‖₁² over randomized mixture pairs."""
    # every mixture component stays above the positivity floor on |v| <= 8
    grid = Grid(v_max=8.0, n_points=1025)
    rng = np.random.default_rng(seed)
    violations = []
    worst = np.inf
    for _ in range(pairs):
        a, b = (int(s) for s in rng.integers(0, 2 ** 31, 2))
        entropy, bound = pinsker_gap(random_mixture(a, grid), random_mixture(b, grid))
        worst = min(worst, entropy - bound)
        if entropy < bound - 1e-12:
            violations.append({"seeds": [a, b], "entropy": entropy, "bound": bound})
    return {"pairs": pairs, "min_margin": float(worst), "violations": violations, "meets_target": not violations}


def print_report(equilibrium: dict, trajectory: dict, convergence: dict, pinsker: dict):
    """Print a formatted evaluation report."""
    print("=" * 60)
    print("KAC-BOLTZMANN SOLVER EVALUATION REPORT")
    print("=" * 60)
    for g, r in equilibrium["residuals"].items():
        print(f"  ‖Q_γ(M_1)‖₁ at γ={g}: {r:.2e}")
    print(f"  mass drift {trajectory['mass_drift']:.2e}, energy drift {trajectory['energy_drift']:.2e}")
    print(f"  largest per-step H increase {trajectory['max_h_increase']:.2e}; H(T)/H(0) = {trajectory['h_ratio']:.3e}")
    cal = trajectory["calibration"]
    print(f"  prefactor measured {cal['measured_prefactor']:.6e} vs {cal['analytic_prefactor']:.6e} "
          f"(rel. err {cal['relative_error']:.2e})")
    print(f"  dt-halving L¹ change {convergence['l1_change']:.2e}")
    print(f"  Pinsker: {pinsker['pairs']} pairs, min margin {pinsker['min_margin']:.3e}, "
          f"{len(pinsker['violations'])} violations")


if __name__ == "__main__":
    print_report(evaluate_equilibrium(), evaluate_trajectory(), evaluate_dt_convergence(), evaluate_pinsker())
