"""Detector count statistics and threshold state discrimination.

Counts for the dark state come from detector noise only; the bright state
adds ``eta * R_sc * tau`` Poisson-distributed signal counts. A shot is
classified bright when its count is at or above the threshold ``n_th``, and
the readout fidelity is the equal-prior mean of the two correct-assignment
probabilities, maximized over every integer threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaln, ndtr, xlogy

from .scenario import SPD, Camera, DetectorModel, ReadoutScenario

__all__ = [
    "CountDistribution",
    "DiscriminationResult",
    "poisson_distribution",
    "discretized_gaussian",
    "dark_distribution",
    "bright_distribution",
    "bright_distribution_exact_camera",
    "discriminate",
    "fidelity_curve",
    "threshold_segments",
    "total_variation",
]

# support half-width in standard deviations; the additive slack keeps
# low-mean Poisson tails well below 1e-15
_TAIL_SIGMAS = 12.0
_TAIL_SLACK = 12


@dataclass(frozen=True, eq=False)
class CountDistribution:
    """Probability mass over consecutive integer counts starting at ``support_offset``."""

    support_offset: int
    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.array(self.pmf, dtype=float)
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)
        object.__setattr__(self, "support_offset", int(self.support_offset))

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.support_offset, self.support_offset + len(self.pmf))

    @property
    def total(self) -> float:
        return float(self.pmf.sum())

    @property
    def mean(self) -> float:
        return float(self.support @ self.pmf)

    @property
    def variance(self) -> float:
        centered = self.support - self.mean
        return float(centered**2 @ self.pmf)

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def prob(self, n) -> np.ndarray | float:
        """P(count = n); zero outside the stored support."""
        idx = np.asarray(n) - self.support_offset
        inside = (idx >= 0) & (idx < len(self.pmf))
        out = np.where(inside, self.pmf[np.clip(idx, 0, len(self.pmf) - 1)], 0.0)
        return out if out.ndim else float(out)

    def on_support(self, lo: int, hi: int) -> np.ndarray:
        """Probabilities for counts ``lo..hi`` inclusive, zero-padded."""
        return np.asarray(self.prob(np.arange(lo, hi + 1)), dtype=float)


@dataclass(frozen=True)
class DiscriminationResult:
    threshold: int
    p_dark_correct: float
    p_bright_correct: float
    fidelity: float


def _normalized(offset: int, pmf: np.ndarray) -> CountDistribution:
    pmf = np.clip(pmf, 0.0, None)
    return CountDistribution(offset, pmf / pmf.sum())


def poisson_distribution(mean: float) -> CountDistribution:
    """Truncated Poisson pmf, evaluated through log-gamma."""
    if mean < 0:
        raise ValueError("Poisson mean must be nonnegative")
    if mean == 0:
        return CountDistribution(0, np.array([1.0]))
    width = _TAIL_SIGMAS * math.sqrt(mean) + _TAIL_SLACK
    lo = max(0, math.floor(mean - width))
    hi = math.ceil(mean + width)
    n = np.arange(lo, hi + 1)
    logpmf = xlogy(n, mean) - mean - gammaln(n + 1.0)
    return _normalized(lo, np.exp(logpmf))


def discretized_gaussian(mean: float, sigma: float) -> CountDistribution:
    """Gaussian integrated over unit bins centered on integers.

    Mass below -1/2 is folded into the zero bin.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    lo = max(0, math.floor(mean - _TAIL_SIGMAS * sigma))
    hi = max(lo, math.ceil(mean + _TAIL_SIGMAS * sigma))
    edges = (np.arange(lo, hi + 2) - 0.5 - mean) / sigma
    # difference of upper-tail probabilities above the mean keeps tail bins accurate
    lower = ndtr(edges)
    upper = ndtr(-edges)
    pmf = np.where(edges[:-1] >= 0, upper[:-1] - upper[1:], lower[1:] - lower[:-1])
    if lo == 0:
        pmf[0] = ndtr((0.5 - mean) / sigma)
    return _normalized(lo, pmf)


def dark_distribution(detector: DetectorModel, tau: float) -> CountDistribution:
    """Counts recorded for a dark-state atom during a window of ``tau`` seconds."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if isinstance(detector, SPD):
        return poisson_distribution(detector.dark_rate * tau)
    if isinstance(detector, Camera):
        return discretized_gaussian(detector.noise_mean, detector.noise_sigma)
    raise TypeError(f"unsupported detector {detector!r}")


def bright_distribution(detector: DetectorModel, tau: float, eta: float,
                        r_sc: float) -> CountDistribution:
    """Counts for a bright-state atom.

    SPD counts are Poisson with the dark and signal means added. Camera
    counts use the Gaussian approximation with mean ``N_QC + s`` and
    variance ``sigma_QC^2 + s`` for signal mean ``s``.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    signal = eta * r_sc * tau
    if isinstance(detector, SPD):
        return poisson_distribution(detector.dark_rate * tau + signal)
    if isinstance(detector, Camera):
        return discretized_gaussian(detector.noise_mean + signal,
                                    math.sqrt(detector.noise_sigma**2 + signal))
    raise TypeError(f"unsupported detector {detector!r}")


def bright_distribution_exact_camera(detector: Camera, tau: float, eta: float,
                                     r_sc: float) -> CountDistribution:
    """Exact camera bright-state pmf: discretized noise convolved with Poisson signal."""
    if not isinstance(detector, Camera):
        raise TypeError("exact convolution is defined for the camera model only")
    noise = dark_distribution(detector, tau)
    signal = poisson_distribution(eta * r_sc * tau)
    pmf = np.convolve(noise.pmf, signal.pmf)
    return _normalized(noise.support_offset + signal.support_offset, pmf)


def discriminate(dark: CountDistribution, bright: CountDistribution) -> DiscriminationResult:
    """Best single-threshold classifier between two count distributions.

    Every integer threshold from the lowest support point (everything
    classified bright) to one past the highest (everything dark) is tried.
    Ties go to the lowest threshold.
    """
    lo = min(dark.support_offset, bright.support_offset)
    hi = max(dark.support[-1], bright.support[-1])
    d = dark.on_support(lo, hi)
    b = bright.on_support(lo, hi)
    # thresholds lo..hi+1; index i <-> threshold lo + i
    p_dark = np.concatenate([[0.0], np.cumsum(d)])
    p_bright = np.concatenate([np.cumsum(b[::-1])[::-1], [0.0]])
    p_dark[-1] = 1.0
    p_bright[0] = 1.0
    p_dark = np.clip(p_dark, 0.0, 1.0)
    p_bright = np.clip(p_bright, 0.0, 1.0)
    fid = 0.5 * (p_dark + p_bright)
    # an interior threshold must separate the cdfs; rounding alone cannot lift it above 1/2
    separation = np.concatenate([[0.0], np.cumsum(d - b)])
    candidate = np.where(separation > 0, fid, -np.inf)
    candidate[0] = fid[0]
    candidate[-1] = fid[-1]
    i = int(np.argmax(candidate))
    return DiscriminationResult(lo + i, float(p_dark[i]), float(p_bright[i]), float(fid[i]))


def fidelity_curve(scenario: ReadoutScenario,
                   taus: Sequence[float]) -> list[tuple[float, DiscriminationResult]]:
    """Optimal-threshold discrimination at each readout duration."""
    taus = list(taus)
    if not taus:
        raise ValueError("taus must be nonempty")
    ro = scenario.readout
    out = []
    for tau in taus:
        dark = dark_distribution(scenario.detector, tau)
        bright = bright_distribution(scenario.detector, tau, ro.collection_efficiency,
                                     ro.scattering_rate)
        out.append((float(tau), discriminate(dark, bright)))
    return out


def threshold_segments(curve: Sequence[tuple[float, DiscriminationResult]]
                       ) -> list[tuple[float, float, int]]:
    """Group a fidelity curve into runs of constant optimal threshold.

    Returns ``(tau_first, tau_last, threshold)`` for each run; the jumps
    between runs are the kinks visible in F(tau).
    """
    segments: list[tuple[float, float, int]] = []
    for tau, res in curve:
        if segments and segments[-1][2] == res.threshold:
            segments[-1] = (segments[-1][0], tau, res.threshold)
        else:
            segments.append((tau, tau, res.threshold))
    return segments


def total_variation(a: CountDistribution, b: CountDistribution) -> float:
    lo = min(a.support_offset, b.support_offset)
    hi = max(a.support[-1], b.support[-1])
    return 0.5 * float(np.abs(a.on_support(lo, hi) - b.on_support(lo, hi)).sum())
