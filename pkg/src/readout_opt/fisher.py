"""Per-shot information and information-rate metrics for imperfect readout.

The per-shot Fisher information of a readout with fidelity F is
``(2F - 1)^2`` and the information rate is ``Q = R (2F - 1)^2``. The
attenuation ratio compares the inverse variance of a population estimate
under imperfect readout (after correcting the range compression) to the
perfect-readout value, either at a given population or averaged over a
uniform population.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from scipy import integrate

__all__ = [
    "InformationPoint",
    "LabelSwapWarning",
    "single_shot_info",
    "normalized_qfi",
    "information_point",
    "fisher_binomial",
    "measured_population",
    "attenuation_ratio_at",
    "attenuation_ratio_uniform",
]


class LabelSwapWarning(UserWarning):
    """A fidelity below 1/2 was mapped through the bright/dark relabeling."""


@dataclass(frozen=True)
class InformationPoint:
    fidelity: float
    rate: float
    single_shot_info: float
    normalized_qfi: float


def _check_fidelity(fidelity: float) -> float:
    if not 0.0 <= fidelity <= 1.0:
        raise ValueError(f"fidelity must lie in [0, 1], got {fidelity}")
    if fidelity < 0.5:
        warnings.warn(f"fidelity {fidelity} < 0.5 treated as {1 - fidelity} "
                      "with swapped labels", LabelSwapWarning, stacklevel=3)
    return fidelity


def single_shot_info(fidelity: float) -> float:
    """``(2F - 1)^2``."""
    f = _check_fidelity(fidelity)
    return (2.0 * f - 1.0) ** 2


def normalized_qfi(rate: float, fidelity: float) -> float:
    """Information rate ``R (2F - 1)^2`` in Hz."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    return rate * single_shot_info(fidelity)


def information_point(fidelity: float, rate: float) -> InformationPoint:
    info = single_shot_info(fidelity)
    return InformationPoint(fidelity, rate, info, rate * info)


def fisher_binomial(p1: float, dp1_dtheta: float) -> float:
    """Fisher information of one two-outcome measurement, ``(dP/dtheta)^2 / (P (1 - P))``."""
    if not 0.0 < p1 < 1.0:
        raise ValueError("Fisher information is singular at p1 in {0, 1}")
    return dp1_dtheta**2 / (p1 * (1.0 - p1))


def measured_population(p1_true: float, fidelity: float) -> float:
    """Probability of reading ``|1>``: ``F P + (1 - F)(1 - P)``."""
    if not (0.0 <= p1_true <= 1.0 and 0.0 <= fidelity <= 1.0):
        raise ValueError("p1_true and fidelity must lie in [0, 1]")
    return fidelity * p1_true + (1.0 - fidelity) * (1.0 - p1_true)


def attenuation_ratio_at(fidelity: float, p1: float) -> float:
    """Inverse-variance ratio between fidelity-F and perfect readout at population ``p1``."""
    if not 0.0 < p1 < 1.0:
        raise ValueError("p1 must lie in (0, 1)")
    info = single_shot_info(fidelity)
    if info == 0.0:
        return 0.0
    if fidelity in (0.0, 1.0):
        return 1.0
    return info / (fidelity * (1.0 - fidelity) / (p1 * (1.0 - p1)) + info)


def attenuation_ratio_uniform(fidelity: float, epsabs: float = 1e-12) -> float:
    """Attenuation ratio averaged over a uniformly distributed population.

    The integrand vanishes smoothly at both endpoints, so plain adaptive
    quadrature converges; ``epsabs`` is its absolute tolerance.
    """
    info = single_shot_info(fidelity)
    if info == 0.0:
        return 0.0
    if fidelity in (0.0, 1.0):
        return 1.0
    c = fidelity * (1.0 - fidelity)

    def integrand(p):
        v = p * (1.0 - p)
        return info * v / (c + info * v)

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=epsabs, epsrel=0.0, limit=200)
    return min(max(val, 0.0), 1.0)
