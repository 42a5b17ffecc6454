"""Shot-level Monte Carlo simulation, used as an oracle for the analytic model.

Random streams
--------------
Shots are simulated in fixed-size chunks. Chunk ``i`` draws from a Philox
counter-based generator keyed by ``SeedSequence(seed).spawn(...)[i]``, so
every estimate depends only on ``(seed, shots)`` and not on how chunks are
scheduled across threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import heating, throughput
from .scenario import SPD, Camera, ReadoutScenario
from .throughput import AdaptiveReset, BlowAway, NonAdaptive, StrategyKind

__all__ = [
    "SimConfig",
    "SimEstimate",
    "CampaignEstimate",
    "CHUNK_SIZE",
    "simulate_fidelity",
    "simulate_retention",
    "simulate_campaign",
    "sample_counts",
    "sample_energies",
]

CHUNK_SIZE = 1 << 16


@dataclass(frozen=True)
class SimConfig:
    scenario: ReadoutScenario
    shots: int = 100_000
    seed: int = 0
    bright_fraction: float = 0.5
    state_dependent_heating: bool = False

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if not 0.0 <= self.bright_fraction <= 1.0:
            raise ValueError("bright_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class SimEstimate:
    value: float
    std_error: float
    shots_used: int

    def agrees_with(self, expected: float, n_sigma: float = 3.0) -> bool:
        return abs(self.value - expected) <= n_sigma * self.std_error


@dataclass(frozen=True)
class CampaignEstimate(SimEstimate):
    """Campaign rate estimate.

    ``value`` is the mean over array preparations of the per-preparation
    iteration rate, the quantity the analytic adaptive rate describes.
    ``wall_clock_rate`` is total executions divided by elapsed time, the
    renewal-reward long-run rate, which is higher for lossy adaptive runs.
    """

    wall_clock_rate: float = math.nan
    elapsed: float = 0.0


def _chunk_generators(seed: int, n_items: int, chunk: int) -> list[tuple[np.random.Generator, int]]:
    n_chunks = max(1, math.ceil(n_items / chunk))
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [chunk] * (n_chunks - 1) + [n_items - chunk * (n_chunks - 1)]
    return [(np.random.Generator(np.random.Philox(ss)), size) for ss, size in zip(children, sizes)]


def _run_chunks(seed: int, n_items: int, work: Callable, threads: int, chunk: int = CHUNK_SIZE):
    jobs = _chunk_generators(seed, n_items, chunk)
    if threads <= 1 or len(jobs) < 2:
        return [work(rng, size) for rng, size in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda job: work(*job), jobs))


def _binomial_se(successes: int, trials: int) -> float:
    # add-one smoothing keeps the error bar nonzero when every trial agrees
    p = (successes + 1.0) / (trials + 2.0)
    return math.sqrt(p * (1.0 - p) / trials)


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def sample_counts(rng: np.random.Generator, scenario: ReadoutScenario, tau: float,
                  bright: np.ndarray) -> np.ndarray:
    """Detector counts for shots whose state mask is ``bright``.

    The camera draws rounded Gaussian noise (negative values clipped to 0)
    plus exact Poisson signal counts.
    """
    ro = scenario.readout
    signal_mean = ro.collection_efficiency * ro.scattering_rate * tau
    size = bright.shape
    det = scenario.detector
    signal = rng.poisson(signal_mean, size) * bright
    if isinstance(det, SPD):
        noise = rng.poisson(det.dark_rate * tau, size)
    elif isinstance(det, Camera):
        noise = np.clip(np.rint(rng.normal(det.noise_mean, det.noise_sigma, size)), 0, None)
        noise = noise.astype(np.int64)
    else:
        raise TypeError(f"unsupported detector {det!r}")
    return noise + signal


def sample_energies(rng: np.random.Generator, temperature, size: int) -> np.ndarray:
    """Thermal energies (in kelvin) as a sum of three unit exponentials times ``T``."""
    return np.asarray(temperature) * rng.standard_exponential((size, 3)).sum(axis=1)


# ---------------------------------------------------------------------------
# Estimators
# ---------------------------------------------------------------------------


def simulate_fidelity(config: SimConfig, tau: float, threshold: int,
                      threads: int = 1) -> SimEstimate:
    """Estimate readout fidelity for a fixed threshold (count >= threshold is bright)."""
    scenario = config.scenario

    def work(rng, size):
        bright = rng.random(size) < config.bright_fraction
        counts = sample_counts(rng, scenario, tau, bright)
        called_bright = counts >= threshold
        n_bright = int(bright.sum())
        return (n_bright, int((called_bright & bright).sum()),
                size - n_bright, int((~called_bright & ~bright).sum()))

    parts = np.array(_run_chunks(config.seed, config.shots, work, threads)).sum(axis=0)
    n1, ok1, n0, ok0 = (int(v) for v in parts)
    # a state with no shots contributes an uninformative 1/2 +- 1/2
    p1 = ok1 / n1 if n1 else 0.5
    p0 = ok0 / n0 if n0 else 0.5
    se1 = _binomial_se(ok1, n1) if n1 else 0.5
    se0 = _binomial_se(ok0, n0) if n0 else 0.5
    se = 0.5 * math.hypot(se0, se1)
    return SimEstimate(0.5 * (p0 + p1), se, config.shots)


def simulate_retention(config: SimConfig, tau: float, threads: int = 1) -> SimEstimate:
    """Estimate the probability that the atom stays trapped after one readout.

    By default every atom is heated as a bright atom. With
    ``state_dependent_heating`` only bright-state shots are heated.
    """
    sc = config.scenario
    recoil = heating.recoil_increment(sc.species)
    t_init = sc.trap.initial_temperature
    t_hot = heating.temperature_after(t_init, sc.readout.scattering_rate * tau, recoil).temperature

    def work(rng, size):
        if config.state_dependent_heating:
            bright = rng.random(size) < config.bright_fraction
            temps = np.where(bright, t_hot, t_init)
        else:
            temps = t_hot
        energies = sample_energies(rng, temps, size)
        return int((energies <= sc.trap.trap_depth).sum())

    kept = sum(_run_chunks(config.seed, config.shots, work, threads))
    return SimEstimate(kept / config.shots, _binomial_se(kept, config.shots), config.shots)


def simulate_campaign(config: SimConfig, strategy: StrategyKind, wall_time: float,
                      p_loss_atom: float | None = None, threads: int = 1,
                      max_resets: int = 10**7) -> CampaignEstimate:
    """Simulate preparations and cycles until ``wall_time`` seconds have elapsed.

    Each preparation costs ``t_dead``; each cycle ``t_cycle`` and loses each
    atom independently with ``p_loss_atom`` (by default the analytic loss at
    ``config.scenario.readout.readout_duration``). Atoms are re-cooled every
    cycle, so the loss is the same in every cycle. The first-loss cycle of an
    ``N``-atom array is drawn directly as a geometric variate with success
    probability ``1 - (1 - p)^N``, which is equivalent to per-cycle Bernoulli
    draws.

    Adaptive reset executes every cycle up to and including the one in which
    a loss is detected. Non-adaptive blocks run ``n`` cycles and keep those
    completed before the first loss. Blow-away executes one cycle.

    Only preparations that finish within ``wall_time`` are counted, and
    ``shots_used`` reports how many that is.
    """
    sc = config.scenario
    td, tc = sc.timing.dead_time, sc.timing.cycle_time
    if p_loss_atom is None:
        recoil = heating.recoil_increment(sc.species)
        state = heating.temperature_after(sc.trap.initial_temperature,
                                          sc.readout.scattering_rate * sc.readout.readout_duration,
                                          recoil)
        p_loss_atom = heating.loss_probability(state, sc.trap)
    p_array = throughput.array_loss(p_loss_atom, sc.atom_count)

    if isinstance(strategy, BlowAway):
        per_prep_time = td + tc
    elif isinstance(strategy, NonAdaptive):
        per_prep_time = td + strategy.block_length * tc
    elif isinstance(strategy, AdaptiveReset):
        per_prep_time = None
    else:
        raise TypeError(f"unknown strategy {strategy!r}")

    if wall_time < td + tc:
        raise ValueError("wall_time too short for a single array preparation")
    if per_prep_time is None and p_array <= 0:
        # one preparation that never ends: report the cycles that fit
        n = math.floor((wall_time - td) / tc)
        rate = n / (td + n * tc)
        return CampaignEstimate(rate, 0.0, 1, rate, td + n * tc)

    # upper bound on preparations that can fit in wall_time
    n_preps = min(max_resets, max(1, math.floor(wall_time / (td + tc))))

    def draw(rng, size):
        if isinstance(strategy, BlowAway):
            executed = np.ones(size, dtype=np.int64)
        elif p_array <= 0:
            executed = np.full(size, strategy.block_length, dtype=np.int64)
        else:
            first_loss = rng.geometric(p_array, size)
            if per_prep_time is None:
                executed = first_loss
            else:
                executed = np.minimum(first_loss - 1, strategy.block_length)
        duration = (td + executed * tc) if per_prep_time is None else np.full(size, per_prep_time)
        return executed, duration

    parts = _run_chunks(config.seed, n_preps, draw, threads)
    executed = np.concatenate([p[0] for p in parts])
    duration = np.concatenate([p[1] for p in parts])
    finished = np.cumsum(duration) <= wall_time
    m = int(finished.sum())
    if m == 0:
        raise ValueError("wall_time too short for a single array preparation")
    executed, duration = executed[finished], duration[finished]
    per_prep_rate = executed / duration
    mean = float(per_prep_rate.mean())
    se = float(per_prep_rate.std(ddof=1) / math.sqrt(m)) if m > 1 else math.inf
    elapsed = float(duration.sum())
    return CampaignEstimate(mean, se, m, float(executed.sum()) / elapsed, elapsed)
