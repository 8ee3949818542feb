"""
Sphere-state Evaluation

1. log Z_N against brute-force sphere quadrature at N = 3 and N = 4
2. Maxwellian degeneracy of H_N, D_{N,γ} and the log-power integral
3. Entropic and strong entropic chaos of the bimodal family

Targets: relative error <= 1e-6 (uniform-energy: 1e-3); |.| <= 1e-6;
strictly decreasing entropy gap, final relative gap <= 10%, D_N/N within
10% of the limit at the largest N.
"""

import sys
import time
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import numpy as np

from cli import ExperimentConfig, scan_n
from densities import bimodal, uniform_energy
from density import maxwellian
from sphere import conditioned_tensor, entropy_HN, entropy_production_DN, log_partition, log_power_integral
from sphere_oracles import log_partition_n3, log_partition_n4

ORACLE_TOLERANCE = 1e-6
DEGENERACY_TOLERANCE = 1e-6
CHAOS_RELATIVE_GAP = 0.10


def evaluate_partition_oracles() -> dict:
    """Compare log_partition with direct quadrature for three base densities."""
    start = time.perf_counter()
    densities = {"maxwellian": maxwellian(1.0), "bimodal": bimodal(), "uniform_energy": uniform_energy()}
    cases = []
    for name, f in densities.items():
        for n, oracle in ((3, log_partition_n3), (4, log_partition_n4)):
            error = abs(float(np.expm1(log_partition(f, n, float(n)) - oracle(f, float(n)))))
            cases.append({
                "density": name,
                "N": n,
                "relative_error": error,
                "tolerance": ORACLE_TOLERANCE,
                "passed": error <= ORACLE_TOLERANCE,
            })
    return {
        "cases": cases,
        "max_relative_error": max(c["relative_error"] for c in cases),
        "meets_target": all(c["passed"] for c in cases),
        "runtime": time.perf_counter() - start,
    }


def evaluate_maxwellian_degeneracy(ns=(10, 100, 1000)) -> dict:
    """H_N, D_{N,γ} and the log-power integral all vanish at f = M_1."""
    start = time.perf_counter()
    f = maxwellian(1.0)
    cases = []
    for n in ns:
        ct = conditioned_tensor(f, n)
        values = {
            "H_N": entropy_HN(ct),
            "D_N_gamma0": entropy_production_DN(ct, 0.0),
            "D_N_gamma1": entropy_production_DN(ct, 1.0),
            "log_power": log_power_integral(ct, 1.0),
        }
        worst = max(abs(v) for v in values.values())
        cases.append({"N": n, **values, "max_abs": worst, "passed": worst <= DEGENERACY_TOLERANCE})
    return {
        "cases": cases,
        "meets_target": all(c["passed"] for c in cases),
        "runtime": time.perf_counter() - start,
    }


def evaluate_entropic_chaos(ns=(10, 100, 1000), gamma: float = 0.0) -> dict:
    """Rescaled entropy and dissipation of F_N against the bimodal limit."""
    start = time.perf_counter()
    config = ExperimentConfig.from_dict({
        "command": "scan-N",
        "density": {"builtin": "bimodal"},
        "n": list(ns),
        "gamma": gamma,
    })
    table = scan_n(config)
    rows = table["rows"]
    final = rows[-1]
    entropy_relative_gap = final["entropy_gap"] / table["H_limit"]
    meets_entropy = table["trends"]["entropy_gap_decreasing"] and entropy_relative_gap <= CHAOS_RELATIVE_GAP
    meets_dissipation = final["dissipation_relative_gap"] <= CHAOS_RELATIVE_GAP
    return {
        "rows": rows,
        "trends": table["trends"],
        "entropy_relative_gap": entropy_relative_gap,
        "dissipation_relative_gap": final["dissipation_relative_gap"],
        "meets_entropy_target": meets_entropy,
        "meets_dissipation_target": meets_dissipation,
        "meets_target": meets_entropy and meets_dissipation,
        "runtime": time.perf_counter() - start,
    }


def print_report(oracles: dict, degeneracy: dict, chaos: dict):
    """Print a formatted evaluation report."""
    print("=" * 60)
    print("SPHERE-STATE EVALUATION REPORT")
    print("=" * 60)
    print("\nPartition-function oracles:")
    for c in oracles["cases"]:
        print(f"  {c['density']:<15} N={c['N']}  rel.err {c['relative_error']:.2e} "
              f"(tol {c['tolerance']:.0e}) {'PASS' if c['passed'] else 'FAIL'}")
    print("\nMaxwellian degeneracy:")
    for c in degeneracy["cases"]:
        print(f"  N={c['N']:<6} max|.| {c['max_abs']:.2e} {'PASS' if c['passed'] else 'FAIL'}")
    print("\nEntropic chaos (bimodal):")
    print(f"  {'N':>6} {'H_N/N':>13} {'D_N/N':>13} {'H gap':>10} {'D rel gap':>10}")
    for r in chaos["rows"]:
        print(f"  {r['N']:>6} {r['H_N_over_N']:>13.6e} {r['D_N_over_N']:>13.6e} "
              f"{r['entropy_gap']:>10.3e} {r['dissipation_relative_gap']:>10.3e}")
    print(f"  limits: H = {chaos['rows'][0]['H_limit']:.6e}, D = {chaos['rows'][0]['D_limit']:.6e}")
    print(f"  Entropy:     {'PASS' if chaos['meets_entropy_target'] else 'FAIL'}")
    print(f"  Dissipation: {'PASS' if chaos['meets_dissipation_target'] else 'FAIL'}")


if __name__ == "__main__":
    print_report(evaluate_partition_oracles(), evaluate_maxwellian_degeneracy(), evaluate_entropic_chaos())
