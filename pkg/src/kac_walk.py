"""
Kac Walk: event-driven simulation of N velocities on S^{N-1}(√N).

Each unordered pair (i, j) jumps at rate (2/(N-1))·(1+v_i²+v_j²)^γ, and a
jump rotates (v_i, v_j) by θ ~ U(-π, π). For γ = 0 the total rate is N and
the pair is uniform. For γ > 0 events are proposed at the bound rate
N·(1+2·v_max²)^γ and thinned with acceptance ((1+v_i²+v_j²)/(1+2·v_max²))^γ.
"""

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid
from tqdm import tqdm

from boltzmann import bin_masses
from config import WORKERS
from density import GridDensity, moment

logger = logging.getLogger(__name__)

LOW_ACCEPTANCE = 0.01
ACCEPTANCE_WINDOW = 1000


class WalkError(ValueError):
    """Invalid walk input."""


class ScheduleMismatchError(WalkError):
    """Sample times or histogram bins of two records disagree."""


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator for one trajectory."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


@dataclass
class ParticleState:
    velocities: np.ndarray
    n: int
    energy_cache: float
    last_pair: Optional[tuple] = None
    max_square: float = 0.0
    proposals: int = 0
    accepted: int = 0

    @classmethod
    def from_velocities(cls, velocities) -> "ParticleState":
        v = np.array(velocities, dtype=float)
        return cls(v, v.size, float(v @ v), max_square=float(np.max(v * v)))

    def recompute_energy(self) -> float:
        return float(self.velocities @ self.velocities)

    def renormalize(self):
        """Rescale exactly back onto the sphere of radius √N."""
        self.velocities *= np.sqrt(self.n / self.recompute_energy())
        self.energy_cache = self.recompute_energy()
        self.max_square = float(np.max(self.velocities ** 2))

    def refresh_max_square(self):
        self.max_square = float(np.max(self.velocities ** 2))

    def copy(self) -> "ParticleState":
        return ParticleState(
            self.velocities.copy(), self.n, self.energy_cache, self.last_pair,
            self.max_square, self.proposals, self.accepted,
        )


def sample_chaotic_initial(
    f: GridDensity,
    n: int,
    rng: np.random.Generator,
    return_raw: bool = False,
):
    """
    Draw v_i i.i.d. from f by inverse CDF on the grid, then rescale to ‖v‖² = N.

    With return_raw the pre-rescaling draw is returned as well.
    """
    if n < 2:
        raise WalkError(f"need at least two particles, got {n}")
    m2 = moment(f, 2)
    if abs(f.mass() - 1.0) > 1e-6 or abs(m2 - 1.0) > 1e-6:
        raise WalkError(f"{f.name} is not unit-energy (mass {f.mass():.8f}, m2 {m2:.8f})")
    cdf = cumulative_trapezoid(f.values, dx=f.spacing, initial=0.0)
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    while True:
        raw = np.interp(rng.random(n), cdf[keep], f.nodes[keep])
        norm2 = float(raw @ raw)
        if norm2 > 0:
            break
    v = raw * np.sqrt(n / norm2)
    state = ParticleState.from_velocities(v)
    return (state, raw) if return_raw else state


def collision_rotate(state: ParticleState, i: int, j: int, theta: float) -> ParticleState:
    """(v_i, v_j) <- (v_i cos θ + v_j sin θ, -v_i sin θ + v_j cos θ), in place."""
    if i == j:
        raise WalkError(f"collision needs two distinct particles, got i = j = {i}")
    v = state.velocities
    vi, vj = v[i], v[j]
    c, s = np.cos(theta), np.sin(theta)
    ni, nj = vi * c + vj * s, -vi * s + vj * c
    v[i], v[j] = ni, nj
    state.energy_cache += (ni * ni + nj * nj) - (vi * vi + vj * vj)
    state.max_square = max(state.max_square, ni * ni, nj * nj)
    state.last_pair = (int(i), int(j))
    return state


class EventSource:
    """Random draws for the walk, pre-drawn in chunks from one generator."""

    def __init__(self, rng: np.random.Generator, n: int, chunk: int = 4096):
        self.rng, self.n, self.chunk = rng, n, chunk
        self._pos = chunk

    def _refill(self):
        c = self.chunk
        self._exp = self.rng.standard_exponential(c)
        self._i = self.rng.integers(0, self.n, c)
        self._j = self.rng.integers(0, self.n - 1, c)
        self._theta = self.rng.uniform(-np.pi, np.pi, c)
        self._u = self.rng.random(c)
        self._pos = 0

    def draw(self) -> tuple:
        """(standard exponential, i, j, θ, uniform) for one proposal."""
        if self._pos >= self.chunk:
            self._refill()
        k = self._pos
        self._pos += 1
        i, j = int(self._i[k]), int(self._j[k])
        if j >= i:
            j += 1
        return self._exp[k], i, j, self._theta[k], self._u[k]


def _as_source(rng, n: int) -> EventSource:
    return rng if isinstance(rng, EventSource) else EventSource(rng, n, chunk=1)


def next_event(state: ParticleState, gamma: float, source: EventSource) -> tuple:
    """Waiting time, pair and angle of the next accepted jump; the state is not changed."""
    n = state.n
    if gamma == 0.0:
        e, i, j, theta, _ = source.draw()
        return e / n, i, j, theta
    v = state.velocities
    waited = 0.0
    while True:
        ceiling = 1.0 + 2.0 * state.max_square
        e, i, j, theta, u = source.draw()
        waited += e / (n * ceiling ** gamma)
        state.proposals += 1
        if u * ceiling ** gamma <= (1.0 + v[i] * v[i] + v[j] * v[j]) ** gamma:
            state.accepted += 1
            return waited, i, j, theta
        if state.proposals % ACCEPTANCE_WINDOW == 0 and state.accepted < LOW_ACCEPTANCE * state.proposals:
            state.refresh_max_square()
            logger.warning("thinning acceptance below %.0f%%; recomputed v_max exactly", 100 * LOW_ACCEPTANCE)
            state.proposals = state.accepted = 0


def step_gillespie(state: ParticleState, gamma: float, rng) -> tuple:
    """Advance one jump; returns (state, Δt)."""
    if not 0.0 <= gamma <= 1.0:
        raise WalkError(f"gamma must lie in [0, 1], got {gamma}")
    dt, i, j, theta = next_event(state, gamma, _as_source(rng, state.n))
    return collision_rotate(state, i, j, theta), dt


@dataclass
class WalkConfig:
    n: int
    gamma: float = 0.0
    t_end: float = 1.0
    seed: int = 0
    sample_times: Optional[Sequence[float]] = None
    bins: int = 64
    bin_range: float = 5.0
    renormalize_every: Optional[int] = None
    chunk: int = 4096

    def __post_init__(self):
        if self.n < 2:
            raise WalkError(f"need at least two particles, got {self.n}")
        if not 0.0 <= self.gamma <= 1.0:
            raise WalkError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.t_end <= 0:
            raise WalkError(f"t_end must be positive, got {self.t_end}")
        if self.bins < 2:
            raise WalkError(f"need at least two histogram bins, got {self.bins}")
        if self.renormalize_every is not None and self.renormalize_every < 1:
            raise WalkError("renormalize_every must be a positive event count")
        times = self.times()
        if times.size and (times[0] < 0 or times[-1] > self.t_end):
            raise WalkError(f"sample times must lie in [0, {self.t_end}]")

    def times(self) -> np.ndarray:
        if self.sample_times is None:
            return np.linspace(0.0, self.t_end, 6)
        return np.asarray(sorted(self.sample_times), dtype=float)

    def edges(self) -> np.ndarray:
        return np.linspace(-self.bin_range, self.bin_range, self.bins + 1)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "gamma": self.gamma,
            "t_end": self.t_end,
            "seed": self.seed,
            "sample_times": self.times().tolist(),
            "bins": self.bins,
            "bin_range": self.bin_range,
            "renormalize_every": self.renormalize_every,
        }


@dataclass
class TrajectoryRecord:
    times: list
    edges: np.ndarray
    m2: list = field(default_factory=list)
    m4: list = field(default_factory=list)
    m6: list = field(default_factory=list)
    momentum: list = field(default_factory=list)
    histograms: list = field(default_factory=list)
    event_count: int = 0
    wall_clock: float = 0.0
    config: dict = field(default_factory=dict)

    def observe(self, state: ParticleState):
        v = state.velocities
        v2 = v * v
        self.m2.append(float(v2.mean()))
        self.m4.append(float((v2 * v2).mean()))
        self.m6.append(float((v2 * v2 * v2).mean()))
        self.momentum.append(float(v.sum()))
        counts, _ = np.histogram(v, self.edges)
        self.histograms.append(counts / state.n)

    def metadata(self) -> dict:
        return {
            "config": self.config,
            "event_count": self.event_count,
            "wall_clock": self.wall_clock,
            "samples": len(self.times),
        }


def simulate(state: ParticleState, config: WalkConfig, rng: np.random.Generator) -> TrajectoryRecord:
    """Run the walk from `state` to config.t_end, observing at the scheduled times."""
    times = config.times()
    record = TrajectoryRecord(times=times.tolist(), edges=config.edges(), config=config.to_dict())
    source = EventSource(rng, state.n, config.chunk)
    start = time.perf_counter()
    t, k = 0.0, 0
    while True:
        dt, i, j, theta = next_event(state, config.gamma, source)
        t_next = t + dt
        while k < times.size and times[k] < t_next:
            record.observe(state)
            k += 1
        if t_next > config.t_end:
            break
        collision_rotate(state, i, j, theta)
        record.event_count += 1
        if config.renormalize_every and record.event_count % config.renormalize_every == 0:
            state.renormalize()
        t = t_next
    record.wall_clock = time.perf_counter() - start
    return record


def run_walk(config: WalkConfig, f0: GridDensity, rng: Optional[np.random.Generator] = None) -> TrajectoryRecord:
    """Chaotic initial data from f0, then the walk; reproducible given config.seed."""
    rng = rng or make_rng(config.seed)
    state = sample_chaotic_initial(f0, config.n, rng)
    return simulate(state, config, rng)


def _run_member(args) -> TrajectoryRecord:
    config, f0, seed_seq = args
    return run_walk(config, f0, make_rng(seed_seq))


def run_ensemble(
    config: WalkConfig,
    f0: GridDensity,
    size: int,
    workers: int = WORKERS,
    progress: bool = False,
) -> list:
    """
    Independent trajectories on Philox streams spawned from SeedSequence(config.seed).

    Records come back in member order, so results do not depend on `workers`.
    """
    if size < 1:
        raise WalkError(f"ensemble size must be positive, got {size}")
    children = np.random.SeedSequence(config.seed).spawn(size)
    jobs = [(config, f0, child) for child in children]
    desc = f"kac walk N={config.n}"
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(tqdm(pool.map(_run_member, jobs), total=size, disable=not progress, desc=desc))
    else:
        records = [_run_member(job) for job in tqdm(jobs, disable=not progress, desc=desc)]
    logger.info("ensemble of %d trajectories at N=%d: %d events", size, config.n,
                sum(r.event_count for r in records))
    return records


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def walk_m4_oracle(m4_initial: float, n: int, times) -> np.ndarray:
    """E m4(t) at γ = 0: the closed ODE dm4/dt = (3N - (N+2)·m4) / (2(N-1))."""
    equilibrium = 3.0 * n / (n + 2.0)
    rate = (n + 2.0) / (2.0 * (n - 1.0))
    return equilibrium + (m4_initial - equilibrium) * np.exp(-rate * np.asarray(times, dtype=float))


def pair_weights(velocities: np.ndarray, gamma: float) -> np.ndarray:
    v2 = np.asarray(velocities, dtype=float) ** 2
    w = (1.0 + v2[:, None] + v2[None, :]) ** gamma
    np.fill_diagonal(w, 0.0)
    return w


def total_rate(velocities: np.ndarray, gamma: float) -> float:
    """Λ = (2/(N-1)) Σ_{i<j} (1+v_i²+v_j²)^γ."""
    n = len(velocities)
    return float(pair_weights(velocities, gamma).sum() / (n - 1))


def pair_selection_probability(velocities: np.ndarray, i: int, gamma: float) -> float:
    """Probability that the next jump involves particle i."""
    w = pair_weights(velocities, gamma)
    return float(w[i].sum() / (0.5 * w.sum()))


# ---------------------------------------------------------------------------
# Metropolis sampler for F_N
# ---------------------------------------------------------------------------

def metropolis_sphere(
    f: GridDensity,
    n: int,
    n_steps: int,
    rng: np.random.Generator,
    initial: Optional[ParticleState] = None,
) -> tuple:
    """
    Metropolis chain on S^{N-1}(√N) targeting f^{⊗N}/Z_N.

    Proposal: one random pair rotation; acceptance f(v_i')f(v_j') / (f(v_i)f(v_j)).
    Returns (state, acceptance rate).
    """
    state = initial.copy() if initial is not None else sample_chaotic_initial(f, n, rng)
    v = state.velocities
    accepted = 0
    i_all = rng.integers(0, n, n_steps)
    j_all = rng.integers(0, n - 1, n_steps)
    theta_all = rng.uniform(-np.pi, np.pi, n_steps)
    log_u = np.log(rng.random(n_steps))
    for step in range(n_steps):
        i, j = int(i_all[step]), int(j_all[step])
        if j >= i:
            j += 1
        c, s = np.cos(theta_all[step]), np.sin(theta_all[step])
        ni, nj = v[i] * c + v[j] * s, -v[i] * s + v[j] * c
        before = f.log_evaluate(np.array([v[i], v[j]])).sum()
        after = f.log_evaluate(np.array([ni, nj])).sum()
        if log_u[step] < after - before:
            collision_rotate(state, i, j, theta_all[step])
            accepted += 1
    return state, accepted / max(n_steps, 1)


# ---------------------------------------------------------------------------
# Propagation of chaos
# ---------------------------------------------------------------------------

@dataclass
class ChaosCheck:
    times: list
    distances: list
    errors: list
    ensemble_size: int
    n: int

    def rows(self) -> list:
        return [
            {"t": t, "l1": d, "error": e}
            for t, d, e in zip(self.times, self.distances, self.errors)
        ]


def pooled_histograms(records: Sequence[TrajectoryRecord]) -> tuple:
    """Ensemble mean and per-bin standard deviation of the histograms, per sample time."""
    if not records:
        raise WalkError("empty ensemble")
    first = records[0]
    for r in records[1:]:
        if not np.allclose(r.times, first.times, rtol=0, atol=1e-12):
            raise ScheduleMismatchError("ensemble members have different sample times")
        if not np.array_equal(r.edges, first.edges):
            raise ScheduleMismatchError("ensemble members have different histogram bins")
    stacked = np.array([r.histograms for r in records])
    std = stacked.std(axis=0, ddof=1) if len(records) > 1 else np.zeros(stacked.shape[1:])
    return stacked.mean(axis=0), std


def propagation_of_chaos_check(records: Sequence[TrajectoryRecord], boltzmann_trajectory) -> ChaosCheck:
    """
    L¹ distance between the pooled single-particle histogram and the solver's
    bin masses at every sample time; error bar Σ_b std_b/√M.
    """
    mean, std = pooled_histograms(records)
    times = records[0].times
    solver_times = list(boltzmann_trajectory.times)
    if len(solver_times) != len(times) or not np.allclose(solver_times, times, rtol=0, atol=1e-9):
        raise ScheduleMismatchError(f"walk samples at {times}, solver at {solver_times}")
    edges = records[0].edges
    size = len(records)
    distances, errors = [], []
    for k, f in enumerate(boltzmann_trajectory.densities):
        reference = bin_masses(f, edges)
        outside = abs((1.0 - mean[k].sum()) - (1.0 - reference.sum()))
        distances.append(float(np.abs(mean[k] - reference).sum() + outside))
        errors.append(float(std[k].sum() / np.sqrt(size)))
    return ChaosCheck(list(times), distances, errors, size, int(records[0].config.get("n", 0)))


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def write_record(record: TrajectoryRecord, out_dir, prefix: str = "walk") -> Path:
    """Moments CSV, histogram CSV, and JSON metadata."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / f"{prefix}_moments.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "m2", "m4", "m6", "momentum"])
        for row in zip(record.times, record.m2, record.m4, record.m6, record.momentum):
            writer.writerow([repr(float(x)) for x in row])
    write_histograms(record.times, record.edges, record.histograms, out_dir / f"{prefix}_histograms.csv")
    path = out_dir / f"{prefix}_meta.json"
    path.write_text(json.dumps(record.metadata(), indent=2))
    return path


def write_histograms(times, edges, histograms, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "bin_left", "bin_right", "mass"])
        for t, hist in zip(times, histograms):
            for left, right, mass in zip(edges[:-1], edges[1:], hist):
                writer.writerow([repr(float(t)), repr(float(left)), repr(float(right)), repr(float(mass))])
    return path
