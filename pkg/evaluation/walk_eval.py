"""
Kac Walk Evaluation

Mechanics: energy drift over 10^6 events at N = 100, the γ = 0 event rate and
same-seed reproducibility. Propagation of chaos: pooled single-particle
histograms against the solver at γ = 0.

Targets: relative drift <= 1e-8; rate = N within 3 standard errors;
bit-identical reruns; L¹ <= 0.05 at the largest N, and no worse than the
smaller N within error bars.
"""

import sys
import time
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

import numpy as np

from boltzmann import SolverConfig, solve
from densities import bimodal
from kac_walk import WalkConfig, make_rng, propagation_of_chaos_check, run_ensemble, run_walk, sample_chaotic_initial, simulate

DRIFT_TOLERANCE = 1e-8
RATE_SIGMAS = 3.0
CHAOS_TOLERANCE = 0.05


def evaluate_mechanics(n: int = 100, events: int = 1_000_000, seed: int = 0) -> dict:
    start = time.perf_counter()
    f0 = bimodal()
    t_end = events / n
    config = WalkConfig(n=n, gamma=0.0, t_end=t_end, seed=seed, sample_times=[0.0, t_end])
    rng = make_rng(seed)
    state = sample_chaotic_initial(f0, n, rng)
    record = simulate(state, config, rng)
    drift = abs(state.recompute_energy() - n) / n
    rate = record.event_count / t_end
    rate_error = np.sqrt(record.event_count) / t_end

    short = WalkConfig(n=n, gamma=0.5, t_end=5.0, seed=seed + 1)
    a, b = run_walk(short, f0), run_walk(short, f0)
    identical = a.m4 == b.m4 and all(np.array_equal(x, y) for x, y in zip(a.histograms, b.histograms))
    return {
        "events": record.event_count,
        "relative_energy_drift": drift,
        "rate": rate,
        "rate_standard_error": rate_error,
        "meets_drift_target": drift <= DRIFT_TOLERANCE,
        "meets_rate_target": abs(rate - n) <= RATE_SIGMAS * rate_error,
        "reproducible": identical,
        "meets_target": drift <= DRIFT_TOLERANCE and abs(rate - n) <= RATE_SIGMAS * rate_error and identical,
        "runtime": time.perf_counter() - start,
    }


def evaluate_chaos(ns=(100, 1000), ensemble: int = 100, times=(0.0, 0.5, 1.0, 2.0), workers: int = 1) -> dict:
    """Histogram L¹ distance to the solver per N and sample time."""
    start = time.perf_counter()
    f0 = bimodal()
    trajectory = solve(f0, SolverConfig(t_end=max(times), gamma=0.0, dissipation=False, sample_times=list(times)))
    checks = {}
    for n in ns:
        config = WalkConfig(n=n, gamma=0.0, t_end=max(times), sample_times=list(times), seed=n)
        records = run_ensemble(config, f0, ensemble, workers=workers, progress=True)
        checks[n] = propagation_of_chaos_check(records, trajectory)
    largest, smaller = checks[max(ns)], checks[min(ns)]
    within = all(d <= CHAOS_TOLERANCE for t, d in zip(largest.times, largest.distances) if t > 0)
    improving = all(
        d_big <= d_small + e_big + e_small
        for d_big, e_big, d_small, e_small in zip(largest.distances, largest.errors, smaller.distances, smaller.errors)
    )
    return {
        "rows": {str(n): check.rows() for n, check in checks.items()},
        "meets_distance_target": within,
        "meets_trend_target": improving,
        "meets_target": within and improving,
        "runtime": time.perf_counter() - start,
    }


def print_report(mechanics: dict, chaos: dict):
    """Print a formatted evaluation report."""
    print("=" * 60)
    print("KAC WALK EVALUATION REPORT")
    print("=" * 60)
    print(f"  events {mechanics['events']}, relative energy drift {mechanics['relative_energy_drift']:.2e}")
    print(f"  event rate {mechanics['rate']:.3f} ± {mechanics['rate_standard_error']:.3f}")
    print(f"  same-seed reruns identical: {mechanics['reproducible']}")
    print("\n  Propagation of chaos:")
    for n, rows in chaos["rows"].items():
        for row in rows:
            print(f"    N={n:<6} t={row['t']:<5g} L¹ {row['l1']:.4f} ± {row['error']:.4f}")


if __name__ == "__main__":
    print_report(evaluate_mechanics(), evaluate_chaos())
