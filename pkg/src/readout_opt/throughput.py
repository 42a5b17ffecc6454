"""Quantum-circuit iteration rate (qCIR) under array reset strategies.

An array preparation costs ``t_dead``; each circuit cycle (initialize,
gates, readout, existence check) costs ``t_cycle``. Strategies:

* :class:`BlowAway` - destructive readout, one cycle per preparation.
* :class:`AdaptiveReset` - keep cycling until the existence check reports a
  lost atom, then reset. The rate is the expectation of the per-preparation
  rate ``L / (t_dead + L t_cycle)`` over the geometric run length ``L``.
* :class:`NonAdaptive` - run a fixed block of ``n`` cycles per preparation
  and keep a cycle's outcome only if every atom has survived up to and
  including that cycle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate

from .scenario import TimingConfig

__all__ = [
    "BlowAway",
    "AdaptiveReset",
    "NonAdaptive",
    "StrategyKind",
    "parse_strategy",
    "ThroughputResult",
    "qcir_fixed",
    "qcir_adaptive",
    "qcir_adaptive_series",
    "qcir_adaptive_array",
    "array_loss",
    "qcir_nonadaptive",
]

# below this loss the adaptive rate is returned as its p -> 0 limit
_P_ZERO = 1e-15
# direct summation is used at and above this loss, the integral form below it
_SERIES_MIN_P = 1e-3
_REL_TOL = 1e-12


@dataclass(frozen=True)
class BlowAway:
    name = "blowaway"


@dataclass(frozen=True)
class AdaptiveReset:
    name = "adaptive"


@dataclass(frozen=True)
class NonAdaptive:
    block_length: int = 1
    name = "nonadaptive"

    def __post_init__(self):
        if int(self.block_length) != self.block_length or self.block_length < 1:
            raise ValueError("block_length must be a positive integer")


StrategyKind = Union[BlowAway, AdaptiveReset, NonAdaptive]


def parse_strategy(name: str, block_length: int = 1) -> StrategyKind:
    key = name.lower().replace("-", "").replace("_", "")
    if key in ("blowaway", "blow"):
        return BlowAway()
    if key in ("adaptive", "adaptivereset"):
        return AdaptiveReset()
    if key in ("nonadaptive", "fixed"):
        return NonAdaptive(block_length)
    raise ValueError(f"unknown strategy {name!r}")


@dataclass(frozen=True)
class ThroughputResult:
    """Iteration rate in Hz and the expected number of cycles per preparation.

    For :class:`NonAdaptive` the run length is the expected number of kept
    cycles per block.
    """

    rate: float
    expected_run_length: float
    strategy: StrategyKind


def qcir_fixed(n: int, timing: TimingConfig) -> float:
    """Rate for exactly ``n`` cycles per array preparation."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return n / (timing.dead_time + n * timing.cycle_time)


def qcir_adaptive_series(p_loss_cycle: float, timing: TimingConfig,
                         rel_tol: float = _REL_TOL) -> float:
    """Adaptive rate by direct summation over run lengths.

    Terms are bounded by ``p q^(n-1) / t_cycle``, so truncating after ``N``
    terms leaves a tail below ``q^N / t_cycle``; ``N`` is chosen to push that
    below ``rel_tol`` times the lower rate bound. Cost grows like ``1/p``.
    """
    p = float(p_loss_cycle)
    if not 0 < p <= 1:
        raise ValueError("direct summation needs 0 < p <= 1")
    td, tc = timing.dead_time, timing.cycle_time
    if p == 1:
        return 1.0 / (td + tc)
    floor = 1.0 / (td + tc)
    n_terms = math.ceil(math.log(rel_tol * floor * tc) / math.log1p(-p)) + 1
    n = np.arange(1, n_terms + 1, dtype=float)
    log_weights = math.log(p) + (n - 1) * math.log1p(-p)
    return float(np.sum(n / (td + n * tc) * np.exp(log_weights)))


def _adaptive_integral(p: float, timing: TimingConfig) -> float:
    # n/(td + n tc) = (1 - a/(n + a)) / tc with a = td/tc, and
    # sum_n p q^(n-1) / (n + a) = p * int_0^1 x^a / (1 - q x) dx.
    # With y = 1 - x the integrand (1-y)^a / (p + q y) peaks at y = 0 over a width ~p.
    td, tc = timing.dead_time, timing.cycle_time
    a = td / tc
    q = 1.0 - p

    def f(y):
        return math.exp(a * math.log1p(-y)) / (p + q * y) if y < 1 else 0.0

    breaks = sorted({min(1.0, c * p) for c in (1.0, 10.0, 100.0, 1e3)} | {min(1.0, 1.0 / a)})
    total = 0.0
    left = 0.0
    for right in breaks + [1.0]:
        if right > left:
            val, _ = integrate.quad(f, left, right, epsabs=0.0, epsrel=1e-13, limit=200)
            total += val
            left = right
    return (1.0 - a * p * total) / tc


def qcir_adaptive(p_loss_cycle: float, timing: TimingConfig) -> ThroughputResult:
    """Single-atom (or whole-array) adaptive-reset rate for per-cycle loss ``p``.

    ``p = 0`` returns the lossless limit ``1/t_cycle`` with an infinite run
    length; ``p = 1`` returns ``1/(t_dead + t_cycle)``.
    """
    p = float(p_loss_cycle)
    if not 0 <= p <= 1:
        raise ValueError("p_loss_cycle must lie in [0, 1]")
    strategy = AdaptiveReset()
    if p < _P_ZERO:
        return ThroughputResult(1.0 / timing.cycle_time, math.inf, strategy)
    if p >= _SERIES_MIN_P:
        rate = qcir_adaptive_series(p, timing)
    else:
        rate = _adaptive_integral(p, timing)
    lo = 1.0 / (timing.dead_time + timing.cycle_time)
    hi = 1.0 / timing.cycle_time
    return ThroughputResult(min(max(rate, lo), hi), 1.0 / p, strategy)


def array_loss(p_loss_atom: float, atom_count: int) -> float:
    """Probability that at least one of ``atom_count`` atoms is lost in a cycle."""
    if atom_count < 1:
        raise ValueError("atom_count must be >= 1")
    if p_loss_atom >= 1:
        return 1.0
    return -math.expm1(atom_count * math.log1p(-p_loss_atom))


def qcir_adaptive_array(p_loss_atom: float, atom_count: int,
                        timing: TimingConfig) -> ThroughputResult:
    """Adaptive rate for an array reset as soon as any atom is lost."""
    return qcir_adaptive(array_loss(p_loss_atom, atom_count), timing)


def qcir_nonadaptive(p_loss_atom: float, atom_count: int, block_length: int,
                     timing: TimingConfig) -> ThroughputResult:
    """Kept-cycle rate for fixed blocks of ``block_length`` cycles.

    Cycle ``k`` of a block is kept with probability ``s^k`` where
    ``s = (1 - p)^N`` is the all-atoms survival per cycle.
    """
    n = int(block_length)
    strategy = NonAdaptive(n)
    if atom_count < 1:
        raise ValueError("atom_count must be >= 1")
    if not 0 <= p_loss_atom <= 1:
        raise ValueError("p_loss_atom must lie in [0, 1]")
    if p_loss_atom == 0:
        kept = float(n)
    elif p_loss_atom == 1:
        kept = 0.0
    else:
        log_s = atom_count * math.log1p(-p_loss_atom)
        # s (1 - s^n) / (1 - s), written with expm1 for s close to 1
        kept = math.exp(log_s) * math.expm1(n * log_s) / math.expm1(log_s)
    rate = kept / (timing.dead_time + n * timing.cycle_time)
    return ThroughputResult(rate, kept, strategy)
