"""
Configuration-driven experiment runner.

Usage:
    python src/cli.py --config experiments/certify_bimodal.json --out runs/certify
    python src/cli.py --config scan.json --seed 7 --threads 4 --log-level DEBUG

The config is a single JSON document:

    {
      "schema_version": 1,
      "command": "certify",
      "density": {"builtin": "bimodal", "params": {"tail_weight": 0.05}},
      "grid": {"v_max": 8.0, "n_points": 513},
      "n": [100, 1000],
      "gamma": 0.0, "beta": 1.0, "k": 3
    }

Exit codes: 0 success, 1 hard certifier failure, 2 invalid configuration.
"""

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np
import scipy

from boltzmann import (
    SolverConfig,
    calibrate_dissipation_prefactor,
    entropy_production_Dgamma,
    m4_oracle,
    moment_envelope,
    moments_bounded,
    pinsker_audit,
    solve,
    write_trajectory,
)
from certifier import (
    MomentMode,
    TheoremReport,
    any_hard_failure,
    certify_thm13,
    certify_thm13_along,
    certify_thm22,
    certify_thm23,
    certify_transfer_thm41,
    certify_villani,
    render_table,
    write_report_bundle,
)
from config import LOG_LEVEL, OUTPUT_DIR, SCHEMA_VERSION, WORKERS
from database import init_db, runs_with_hash, save_run
from densities import BUILTIN_DENSITIES, make_density
from density import DensityError, Grid, GridDensity, maxwellian, normalize_unit_energy, read_density_csv, relative_entropy
from kac_walk import WalkConfig, propagation_of_chaos_check, run_ensemble, walk_m4_oracle, write_record
from sphere import (
    SphereResolution,
    conditioned_tensor,
    entropy_HN,
    entropy_production_DN,
    g_concentration_profile,
)

logger = logging.getLogger(__name__)

COMMANDS = ("simulate-walk", "solve-boltzmann", "certify", "scan-N", "chaos-metrics")
THEOREMS = ("villani", "thm22", "thm23", "thm13", "thm41")

# D_{N,γ}/N -> LIMIT_DISSIPATION_FACTOR · D_γ(f) under strong entropic chaos
LIMIT_DISSIPATION_FACTOR = 1.0

EXIT_OK = 0
EXIT_HARD_FAIL = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    """Invalid experiment configuration; `errors` lists every problem found."""

    def __init__(self, errors: list):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {e}" for e in self.errors))


@dataclass
class ExperimentConfig:
    command: str
    density: dict = field(default_factory=lambda: {"builtin": "bimodal"})
    schema_version: int = SCHEMA_VERSION
    grid: dict = field(default_factory=dict)
    resolution: dict = field(default_factory=dict)
    n: list = field(default_factory=list)
    gamma: float = 0.0
    beta: float = 1.0
    k: float = 3.0
    a: Optional[float] = None
    mu: Optional[float] = None
    eps: float = 0.5
    mode: str = "polynomial"
    theorems: list = field(default_factory=lambda: list(THEOREMS))
    along_trajectory: bool = False
    dt: Optional[float] = None
    t_end: float = 5.0
    sample_times: Optional[list] = None
    theta_nodes: Optional[int] = None
    seed: int = 0
    ensemble: int = 1
    bins: int = 64
    bin_range: float = 5.0
    out: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        errors = validate_config(data)
        if errors:
            raise ConfigError(errors)
        config = cls(**data)
        config.n = [int(n) for n in config.n]
        return config

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def moment_mode(self) -> MomentMode:
        if self.mode == "exponential":
            return MomentMode.exponential(self.a, self.mu)
        return MomentMode.polynomial(self.k)

    def sphere_resolution(self) -> SphereResolution:
        return SphereResolution(**self.resolution)


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def validate_config(data) -> list:
    """Every schema violation in `data`, empty when valid."""
    if not isinstance(data, dict):
        return ["config must be a JSON object"]
    errors = []
    known = {f.name for f in fields(ExperimentConfig)}
    for key in sorted(set(data) - known):
        errors.append(f"unknown key '{key}'")
    if data.get("schema_version", SCHEMA_VERSION) != SCHEMA_VERSION:
        errors.append(f"schema_version must be {SCHEMA_VERSION}, got {data.get('schema_version')!r}")
    command = data.get("command")
    if command not in COMMANDS:
        errors.append(f"command must be one of {list(COMMANDS)}, got {command!r}")

    density = data.get("density", {"builtin": "bimodal"})
    if not isinstance(density, dict) or ("builtin" in density) == ("csv" in density):
        errors.append("density needs exactly one of 'builtin' or 'csv'")
    else:
        extra = set(density) - {"builtin", "csv", "tail", "params"}
        if extra:
            errors.append(f"unknown density keys {sorted(extra)}")
        if "builtin" in density and density["builtin"] not in BUILTIN_DENSITIES:
            errors.append(f"unknown builtin density {density['builtin']!r}")
        if "builtin" in density:
            allowed = set(BUILTIN_DENSITIES.get(density["builtin"], BUILTIN_DENSITIES["bimodal"]).defaults)
            unknown = set(density.get("params", {})) - allowed
            if unknown:
                errors.append(f"unknown parameters for {density['builtin']}: {sorted(unknown)}")
        if "csv" in density and not Path(density["csv"]).exists():
            errors.append(f"density csv {density['csv']!r} does not exist")

    grid = data.get("grid", {})
    if set(grid) - {"v_max", "n_points"}:
        errors.append(f"unknown grid keys {sorted(set(grid) - {'v_max', 'n_points'})}")
    resolution_keys = {f.name for f in fields(SphereResolution)}
    if set(data.get("resolution", {})) - resolution_keys:
        errors.append(f"unknown resolution keys {sorted(set(data['resolution']) - resolution_keys)}")

    ns = data.get("n", [])
    if not isinstance(ns, list) or not all(isinstance(n, int) and not isinstance(n, bool) for n in ns):
        errors.append("n must be a list of integers")
        ns = []
    if command in ("simulate-walk", "certify", "scan-N", "chaos-metrics") and not ns:
        errors.append(f"{command} needs a non-empty 'n' list")
    if command == "scan-N" and ns != sorted(ns):
        errors.append("scan-N needs an ascending 'n' list")
    if any(n < 3 for n in ns) and command in ("certify", "scan-N"):
        errors.append("particle numbers must be at least 3")

    for key in ("gamma", "beta", "k", "eps", "t_end", "bin_range"):
        if key in data and not _is_number(data[key]):
            errors.append(f"{key} must be a number")
    if _is_number(data.get("gamma", 0.0)) and not 0.0 <= data.get("gamma", 0.0) <= 1.0:
        errors.append("gamma must lie in [0, 1]")
    if data.get("mode", "polynomial") not in ("polynomial", "exponential"):
        errors.append("mode must be 'polynomial' or 'exponential'")
    if data.get("mode") == "exponential" and not (_is_number(data.get("a")) and _is_number(data.get("mu"))):
        errors.append("exponential mode needs numeric 'a' and 'mu'")
    unknown_theorems = set(data.get("theorems", [])) - set(THEOREMS)
    if unknown_theorems:
        errors.append(f"unknown theorems {sorted(unknown_theorems)}")
    for key in ("seed", "ensemble", "bins"):
        if key in data and not (isinstance(data[key], int) and data[key] >= 0):
            errors.append(f"{key} must be a nonnegative integer")
    if data.get("ensemble", 1) == 0:
        errors.append("ensemble must be positive")
    return errors


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError([f"config file {path} not found"])
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path} is not valid JSON: {exc}"])
    return ExperimentConfig.from_dict(data)


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def build_density(config: ExperimentConfig) -> GridDensity:
    """Sample the configured density on the configured grid, at unit energy."""
    source = config.density
    grid = Grid(**config.grid) if config.grid else None
    if "builtin" in source:
        f = make_density(source["builtin"], grid, **source.get("params", {}))
    else:
        f = read_density_csv(source["csv"], source.get("tail"))
    return normalize_unit_energy(f)


def _write_atomic(path: Path, text: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def _write_rows(path: Path, rows: list):
    if not rows:
        return
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------

def scan_n(config: ExperimentConfig, f: Optional[GridDensity] = None) -> dict:
    """
    Per-N convergence table: H_N/N and D_{N,γ}/N against their limits, with the
    g-concentration residual, plus trend flags over the ascending N list.
    """
    f = f or build_density(config)
    resolution = config.sphere_resolution()
    gamma = config.gamma
    h_limit = relative_entropy(f, maxwellian(1.0, f.grid))
    d_limit = LIMIT_DISSIPATION_FACTOR * entropy_production_Dgamma(f, gamma)
    equilibrium = h_limit <= 1e-14
    profile = None if equilibrium else g_concentration_profile(f, ns=config.n, resolution=resolution)
    rows = []
    for idx, n in enumerate(config.n):
        ct = conditioned_tensor(f, n, resolution=resolution)
        h_n = entropy_HN(ct) / n
        d_n = entropy_production_DN(ct, gamma) / n
        rows.append({
            "N": n,
            "H_N_over_N": h_n,
            "D_N_over_N": d_n,
            "H_limit": h_limit,
            "D_limit": d_limit,
            "entropy_gap": abs(h_n - h_limit),
            "dissipation_gap": abs(d_n - d_limit),
            "dissipation_relative_gap": abs(d_n - d_limit) / d_limit if d_limit > 0 else 0.0,
            "g_residual": profile.entries[idx].sup_residual if profile else 0.0,
        })
        logger.info("scan N=%d: H_N/N=%.6e (limit %.6e) D_N/N=%.6e (limit %.6e)",
                    n, h_n, h_limit, d_n, d_limit)

    def decreasing(key):
        values = [r[key] for r in rows]
        return all(b < a for a, b in zip(values, values[1:]))

    trends = {
        "entropy_gap_decreasing": equilibrium or decreasing("entropy_gap"),
        "dissipation_gap_decreasing": equilibrium or decreasing("dissipation_gap"),
        "g_residual_decreasing": equilibrium or profile.decreasing,
    }
    return {"rows": rows, "trends": trends, "H_limit": h_limit, "D_limit": d_limit}


def _solver_config(config: ExperimentConfig, sample_times=None) -> SolverConfig:
    options = {"t_end": config.t_end, "gamma": config.gamma, "dt": config.dt}
    if config.theta_nodes:
        options["theta_nodes"] = config.theta_nodes
    times = sample_times if sample_times is not None else config.sample_times
    if times is not None:
        options["sample_times"] = times
    return SolverConfig(**options)


def _walk_config(config: ExperimentConfig, n: int) -> WalkConfig:
    return WalkConfig(
        n=n,
        gamma=config.gamma,
        t_end=config.t_end,
        seed=config.seed,
        sample_times=config.sample_times,
        bins=config.bins,
        bin_range=config.bin_range,
    )


def run_simulate_walk(config: ExperimentConfig, out: Path, threads: int) -> tuple:
    f0 = build_density(config)
    summary = {"runs": []}
    for n in config.n:
        walk_config = _walk_config(config, n)
        records = run_ensemble(walk_config, f0, config.ensemble, workers=threads, progress=True)
        for idx, record in enumerate(records):
            write_record(record, out, prefix=f"walk_N{n}_m{idx:03d}")
        mean_m4 = np.mean([r.m4 for r in records], axis=0)
        entry = {"N": n, "events": [r.event_count for r in records], "mean_m4": mean_m4.tolist()}
        if config.gamma == 0.0:
            entry["m4_oracle"] = walk_m4_oracle(records[0].m4[0], n, records[0].times).tolist()
        summary["runs"].append(entry)
    _write_atomic(out / "summary.json", json.dumps(summary, indent=2))
    return EXIT_OK, summary


def run_solve_boltzmann(config: ExperimentConfig, out: Path, threads: int) -> tuple:
    f0 = build_density(config)
    trajectory = solve(f0, _solver_config(config))
    write_trajectory(trajectory, out)
    summary = {
        "moments_bounded": {str(k): v for k, v in moments_bounded(trajectory).items()},
        "moment_running_max": {str(k): v[-1] for k, v in moment_envelope(trajectory).items()},
        "pinsker": pinsker_audit(trajectory),
        "entropy_violations": trajectory.entropy_violations,
    }
    if len(trajectory.times) >= 3:
        summary["calibration"] = calibrate_dissipation_prefactor(trajectory).to_dict()
    if config.gamma == 0.0:
        summary["m4_oracle"] = m4_oracle(trajectory.m4[0], trajectory.times).tolist()
    _write_atomic(out / "summary.json", json.dumps(summary, indent=2))
    return EXIT_OK, summary


def certify_all(config: ExperimentConfig, f: Optional[GridDensity] = None) -> list:
    """Run every configured theorem check at every configured N."""
    f = f or build_density(config)
    resolution = config.sphere_resolution()
    mode = config.moment_mode()
    reports: list[TheoremReport] = []
    for n in config.n:
        ct = conditioned_tensor(f, n, resolution=resolution)
        if "villani" in config.theorems:
            reports.append(certify_villani(ct))
        if "thm22" in config.theorems and config.gamma < 1:
            reports.append(certify_thm22(ct, config.gamma, mode))
        if "thm23" in config.theorems and config.gamma < 1:
            reports.append(certify_thm23(ct, config.gamma, config.beta, mode, eps=config.eps))
        if "thm41" in config.theorems:
            reports.append(certify_transfer_thm41(f, 0.0 if config.gamma == 1 else config.eps, ct, config.gamma))
    if "thm13" in config.theorems and config.gamma < 1:
        if config.along_trajectory and mode.kind == "polynomial":
            trajectory = solve(f, _solver_config(config))
            reports.extend(certify_thm13_along(trajectory, f, config.beta, config.k, config.eps))
        else:
            reports.append(certify_thm13(f, config.gamma, config.beta, mode, config.eps))
    return reports


def run_certify(config: ExperimentConfig, out: Path, threads: int) -> tuple:
    reports = certify_all(config)
    write_report_bundle(reports, out / "report.json")
    print(render_table(reports))
    code = EXIT_HARD_FAIL if any_hard_failure(reports) else EXIT_OK
    return code, {"reports": len(reports), "hard_failure": code == EXIT_HARD_FAIL}


def run_scan_n(config: ExperimentConfig, out: Path, threads: int) -> tuple:
    table = scan_n(config)
    _write_rows(out / "scan.csv", table["rows"])
    _write_atomic(out / "trends.json", json.dumps(table["trends"], indent=2))
    return EXIT_OK, table["trends"]


def run_chaos_metrics(config: ExperimentConfig, out: Path, threads: int) -> tuple:
    """Pooled walk histograms against the solver at matching sample times."""
    f0 = build_density(config)
    walk_configs = {n: _walk_config(config, n) for n in config.n}
    times = next(iter(walk_configs.values())).times().tolist()
    trajectory = solve(f0, _solver_config(config, sample_times=times))
    rows = []
    for n, walk_config in walk_configs.items():
        records = run_ensemble(walk_config, f0, config.ensemble, workers=threads, progress=True)
        check = propagation_of_chaos_check(records, trajectory)
        rows.extend({"N": n, **row} for row in check.rows())
    _write_rows(out / "chaos.csv", rows)
    return EXIT_OK, {"rows": rows}


PIPELINES = {
    "simulate-walk": run_simulate_walk,
    "solve-boltzmann": run_solve_boltzmann,
    "certify": run_certify,
    "scan-N": run_scan_n,
    "chaos-metrics": run_chaos_metrics,
}


def write_manifest(out: Path, config: ExperimentConfig, digest: str, exit_code: int, wall_clock: float) -> dict:
    artifacts = {}
    for path in sorted(out.iterdir()):
        if path.is_file() and path.name != "manifest.json":
            artifacts[path.name] = hashlib.sha256(path.read_bytes()).hexdigest()
    manifest = {
        "command": config.command,
        "config_sha256": digest,
        "config": config.to_dict(),
        "seed": config.seed,
        "exit_code": exit_code,
        "wall_clock": wall_clock,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
        "artifacts": artifacts,
    }
    _write_atomic(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True))
    return manifest


def run(config_path, out=None, seed: Optional[int] = None, threads: Optional[int] = None,
        register: bool = True) -> int:
    """Execute one configured pipeline; returns the process exit code."""
    try:
        config = load_config(config_path)
    except ConfigError as exc:
        logger.error("%s", exc)
        return EXIT_CONFIG
    if seed is not None:
        config.seed = int(seed)
    out_dir = Path(out or config.out or os.path.join(OUTPUT_DIR, config.command))
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = config_hash(config)
    logger.info("running %s (config %s) into %s", config.command, digest[:12], out_dir)

    start = time.perf_counter()
    try:
        exit_code, _ = PIPELINES[config.command](config, out_dir, threads or WORKERS)
    except DensityError as exc:
        logger.error("invalid density input: %s", exc)
        exit_code = EXIT_CONFIG
    wall_clock = time.perf_counter() - start

    manifest = write_manifest(out_dir, config, digest, exit_code, wall_clock)
    if register:
        init_db()
        previous = runs_with_hash(digest)
        if previous:
            logger.info("config %s ran %d time(s) before; last exit code %d",
                        digest[:12], len(previous), previous[-1]["exit_code"])
        save_run(digest, config.command, exit_code, manifest, seed=config.seed, out_dir=str(out_dir))
    logger.info("%s finished with exit code %d in %.1fs", config.command, exit_code, wall_clock)
    return exit_code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Kac walk numerical laboratory")
    parser.add_argument("--config", required=True, help="Experiment config JSON")
    parser.add_argument("--out", help="Output directory for artifacts")
    parser.add_argument("--seed", type=int, help="Seed override")
    parser.add_argument("--threads", type=int, help="Ensemble worker processes (results do not depend on it)")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="Logging level")
    parser.add_argument("--no-register", action="store_true", help="Skip the run registry")
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    return run(args.config, args.out, args.seed, args.threads, register=not args.no_register)


if __name__ == "__main__":
    sys.exit(main())
