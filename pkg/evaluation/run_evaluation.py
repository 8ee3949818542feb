#!/usr/bin/env python3
"""
Run all evaluations for the Kac walk laboratory.

This script runs:
1. Partition-function oracles (log Z_N vs direct sphere quadrature, N = 3, 4)
2. Maxwellian degeneracy (H_N, D_{N,γ}, log-power integral vanish)
3. Villani bound on the bimodal conditioned tensorisation
4. Finite-N log-scalable and log-power inequalities
5. Entropic and strong entropic chaos trends
6. Kac-Boltzmann solver (equilibrium, conservation, H-theorem, calibration)
7. Propagation of chaos (walk histograms vs solver)
8. Walk mechanics (energy drift, event rate, reproducibility)
9. Kac-Boltzmann inequality along a solver trajectory
10. Pinsker sweep over randomized density pairs

Usage:
    python evaluation/run_evaluation.py [--verbose] [--quick] [--output results.json]
"""

import argparse
import json
import logging
import sys
from datetime import datetime
from pathlib import Path

# Add parent directory and src directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from evaluation.certifier_eval import (
    evaluate_finite_n,
    evaluate_kac_boltzmann,
    evaluate_villani,
    print_report as print_certifier,
)
from evaluation.solver_eval import (
    evaluate_dt_convergence,
    evaluate_equilibrium,
    evaluate_pinsker,
    evaluate_trajectory,
    print_report as print_solver,
)
from evaluation.sphere_eval import (
    evaluate_entropic_chaos,
    evaluate_maxwellian_degeneracy,
    evaluate_partition_oracles,
    print_report as print_sphere,
)
from evaluation.walk_eval import evaluate_chaos, evaluate_mechanics, print_report as print_walk

# Smoke-run sizes; the acceptance sizes are the evaluate_* defaults
QUICK = {
    "ns": (10, 100),
    "finite_ns": (20, 50),
    "chaos_ns": (50, 200),
    "ensemble": 20,
    "events": 100_000,
    "t_end": 1.0,
}


def _section(title: str):
    print("\n" + "-" * 70)
    print(f" {title}")
    print("-" * 70)


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


def run_all_evaluations(verbose: bool = False, quick: bool = False, workers: int = 1) -> dict:
    """Run all evaluation suites and return combined results."""
    print("\n" + "=" * 70)
    print(" KAC WALK LABORATORY - EVALUATION SUITE")
    print("=" * 70)
    print(f"\nTimestamp: {datetime.now().isoformat()}")
    if quick:
        print("Mode: quick (reduced sizes, not the acceptance configuration)")

    results = {
        "timestamp": datetime.now().isoformat(),
        "quick": quick,
        "evaluations": {},
        "summary": {},
    }
    sizes = QUICK if quick else {}

    _section("1. PARTITION-FUNCTION ORACLES")
    oracles = evaluate_partition_oracles()
    results["evaluations"]["partition_oracles"] = oracles
    print(f"  Max relative error: {oracles['max_relative_error']:.2e} {_status(oracles['meets_target'])}")

    _section("2. MAXWELLIAN DEGENERACY")
    degeneracy = evaluate_maxwellian_degeneracy(**({"ns": sizes["ns"]} if quick else {}))
    results["evaluations"]["maxwellian_degeneracy"] = degeneracy
    worst = max(c["max_abs"] for c in degeneracy["cases"])
    print(f"  Max |H_N|, |D_N|, |log-power|: {worst:.2e} (target <=1e-6) {_status(degeneracy['meets_target'])}")

    _section("3. VILLANI BOUND")
    villani = evaluate_villani(**({"ns": sizes["ns"]} if quick else {}))
    results["evaluations"]["villani"] = villani
    margins = ", ".join(f"N={r['N']}: {r['margin']:.3e}" for r in villani["reports"])
    print(f"  Margins: {margins} {_status(villani['meets_target'])}")

    _section("4. FINITE-N INEQUALITIES (log-scalable, log-power)")
    finite_n = evaluate_finite_n(**({"ns": sizes["finite_ns"]} if quick else {}))
    results["evaluations"]["finite_n"] = finite_n
    verdicts = [r["verdict"] for r in finite_n["reports"]]
    print(f"  Checks passed: {verdicts.count('pass')}/{len(verdicts)}")
    print(f"  Log-power constant spread across N: {finite_n['constant_spread']:.1e} {_status(finite_n['meets_target'])}")

    _section("5. ENTROPIC CHAOS")
    chaos_trend = evaluate_entropic_chaos(**({"ns": sizes["ns"]} if quick else {}))
    results["evaluations"]["entropic_chaos"] = chaos_trend
    print(f"  Final H gap: {chaos_trend['entropy_relative_gap']:.2%} (target <=10%) "
          f"{_status(chaos_trend['meets_entropy_target'])}")
    print(f"  Final D gap: {chaos_trend['dissipation_relative_gap']:.2%} (target <=10%) "
          f"{_status(chaos_trend['meets_dissipation_target'])}")

    _section("6. KAC-BOLTZMANN SOLVER")
    equilibrium = evaluate_equilibrium()
    trajectory = evaluate_trajectory(**({"t_end": sizes["t_end"]} if quick else {}))
    convergence = evaluate_dt_convergence()
    solver_ok = (
        equilibrium["meets_target"]
        and trajectory["meets_conservation_target"]
        and trajectory["meets_h_target"]
        and trajectory["meets_calibration_target"]
        and convergence["meets_target"]
    )
    results["evaluations"]["solver"] = {
        "equilibrium": equilibrium,
        "trajectory": trajectory,
        "dt_convergence": convergence,
        "meets_target": solver_ok,
    }
    print(f"  ‖Q(M_1)‖₁: {equilibrium['max_residual']:.2e} {_status(equilibrium['meets_target'])}")
    print(f"  Drift: {max(trajectory['mass_drift'], trajectory['energy_drift']):.2e} "
          f"{_status(trajectory['meets_conservation_target'])}")
    print(f"  H non-increasing: {_status(trajectory['meets_h_target'])}")
    print(f"  Prefactor rel. error: {trajectory['calibration']['relative_error']:.2e} "
          f"{_status(trajectory['meets_calibration_target'])}")

    _section("7. PROPAGATION OF CHAOS")
    chaos_options = {"workers": workers}
    if quick:
        chaos_options.update(ns=sizes["chaos_ns"], ensemble=sizes["ensemble"])
    chaos = evaluate_chaos(**chaos_options)
    results["evaluations"]["propagation_of_chaos"] = chaos
    print(f"  L¹ <= 0.05 at largest N: {_status(chaos['meets_distance_target'])}")
    print(f"  Larger N no worse: {_status(chaos['meets_trend_target'])}")

    _section("8. WALK MECHANICS")
    mechanics = evaluate_mechanics(**({"events": sizes["events"]} if quick else {}))
    results["evaluations"]["walk_mechanics"] = mechanics
    print(f"  Energy drift: {mechanics['relative_energy_drift']:.2e} {_status(mechanics['meets_drift_target'])}")
    print(f"  Event rate: {mechanics['rate']:.3f} ± {mechanics['rate_standard_error']:.3f} "
          f"{_status(mechanics['meets_rate_target'])}")
    print(f"  Reproducible: {_status(mechanics['reproducible'])}")

    _section("9. KAC-BOLTZMANN INEQUALITY ALONG A TRAJECTORY")
    kac_boltzmann = evaluate_kac_boltzmann(**({"t_end": sizes["t_end"]} if quick else {}))
    results["evaluations"]["kac_boltzmann"] = kac_boltzmann
    print(f"  Uniform constant: {kac_boltzmann['constant']:.3e} {_status(kac_boltzmann['meets_target'])}")

    _section("10. PINSKER SWEEP")
    pinsker = evaluate_pinsker()
    results["evaluations"]["pinsker"] = pinsker
    print(f"  {pinsker['pairs']} pairs, min margin {pinsker['min_margin']:.3e} {_status(pinsker['meets_target'])}")

    if verbose:
        print()
        print_sphere(oracles, degeneracy, chaos_trend)
        print_solver(equilibrium, trajectory, convergence, pinsker)
        print_walk(mechanics, chaos)
        print_certifier(villani, finite_n, kac_boltzmann)

    # Summary
    print("\n" + "=" * 70)
    print(" SUMMARY")
    print("=" * 70)

    passes = {
        "partition_oracles": oracles["meets_target"],
        "maxwellian_degeneracy": degeneracy["meets_target"],
        "villani": villani["meets_target"],
        "finite_n": finite_n["meets_target"],
        "entropic_chaos": chaos_trend["meets_target"],
        "solver": solver_ok,
        "propagation_of_chaos": chaos["meets_target"],
        "walk_mechanics": mechanics["meets_target"],
        "kac_boltzmann": kac_boltzmann["meets_target"],
        "pinsker": pinsker["meets_target"],
    }
    all_pass = all(passes.values())
    results["summary"] = {"all_targets_met": all_pass, **{f"{k}_pass": v for k, v in passes.items()}}

    print()
    for name, ok in passes.items():
        print(f"  {name.replace('_', ' ').capitalize() + ':':<26} {_status(ok)}")
    print(f"\n  Overall: {'ALL TARGETS MET' if all_pass else 'SOME TARGETS NOT MET'}")
    print("=" * 70 + "\n")

    return results


def save_results(results: dict, output_path: str):
    """Save evaluation results to JSON file."""
    with open(output_path, "w") as f:
        json.dump(results, f, indent=2, default=str)
    print(f"Results saved to: {output_path}")


def main():
    parser = argparse.ArgumentParser(description="Run evaluation suite for the Kac walk laboratory")
    parser.add_argument("--verbose", "-v", action="store_true", help="Show detailed output")
    parser.add_argument("--quick", "-q", action="store_true", help="Reduced sizes for a smoke run")
    parser.add_argument("--workers", "-w", type=int, default=1, help="Worker processes for walk ensembles")
    parser.add_argument("--output", "-o", type=str, help="Save results to JSON file")
    args = parser.parse_args()

    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    results = run_all_evaluations(verbose=args.verbose, quick=args.quick, workers=args.workers)

    if args.output:
        save_results(results, args.output)
    sys.exit(0 if results["summary"]["all_targets_met"] else 1)


if __name__ == "__main__":
    main()
