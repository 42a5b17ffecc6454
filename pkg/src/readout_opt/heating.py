"""Recoil heating during readout and the resulting thermal trap loss.

Each scattered photon heats the atom by two recoil increments (absorption
and emission). The atom's mechanical energy is Maxwell-Boltzmann
distributed in a harmonic trap, i.e. a shape-3 gamma distribution with
scale ``T_a``, and the atom is lost if that energy exceeds the trap depth.
All temperatures are in kelvin, energies are expressed as temperatures.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import constants

from .scenario import AtomSpecies, TrapConfig

__all__ = [
    "ThermalState",
    "RecoilModel",
    "PhotonBudget",
    "recoil_increment",
    "temperature_after",
    "energy_pdf",
    "loss_probability",
    "loss_from_ratio",
    "log_loss_from_ratio",
    "max_scattered_photons",
]

# 1/xi above which exp(-1/xi) is evaluated through its logarithm
_LOG_SPACE_THRESHOLD = 700.0


@dataclass(frozen=True)
class ThermalState:
    temperature: float


@dataclass(frozen=True)
class RecoilModel:
    """Temperature rise per single photon absorption or emission (K)."""

    delta_t_per_event: float


class PhotonBudget(NamedTuple):
    n_scattered: float
    feasible: bool


def recoil_increment(species: AtomSpecies) -> RecoilModel:
    """Recoil temperature ``(h/lambda)^2 / (2 k_B m)`` for one photon event."""
    p_photon = constants.h / species.readout_wavelength
    return RecoilModel(p_photon**2 / (2.0 * constants.k * species.mass))


def temperature_after(initial: float, n_scattered: float, recoil: RecoilModel) -> ThermalState:
    """Atom temperature after scattering ``n_scattered`` photons (may be fractional)."""
    if n_scattered < 0:
        raise ValueError("n_scattered must be nonnegative")
    return ThermalState(initial + 2.0 * n_scattered * recoil.delta_t_per_event)


def energy_pdf(t, state: ThermalState):
    """Energy density ``t^2 / (2 T^3) exp(-t/T)`` in 1/K; zero for ``t < 0``."""
    t = np.asarray(t, dtype=float)
    temp = state.temperature
    tp = np.maximum(t, 0.0)
    pdf = tp**2 / (2.0 * temp**3) * np.exp(-tp / temp)
    out = np.where(t >= 0, pdf, 0.0)
    return out if out.ndim else float(out)


def log_loss_from_ratio(xi):
    """Natural log of the loss probability for temperature ratio ``xi``.

    Finite for any ``xi > 0``; returns ``-inf`` at ``xi <= 0``.
    """
    xi = np.asarray(xi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / xi
        out = np.log1p(inv + 0.5 * inv**2) - inv
    out = np.where(xi > 0, out, -np.inf)
    return out if out.ndim else float(out)


def loss_from_ratio(xi):
    """Closed-form loss ``(1 + 1/xi + 1/(2 xi^2)) exp(-1/xi)``.

    Vectorized over ``xi``. Deep traps (``1/xi > 700``) go through the log
    form and may underflow to exactly 0.0; use :func:`log_loss_from_ratio`
    when the magnitude matters there.
    """
    xi = np.asarray(xi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv = 1.0 / xi
        direct = (1.0 + inv + 0.5 * inv**2) * np.exp(-inv)
    deep = np.exp(log_loss_from_ratio(np.where(xi > 0, xi, 1.0)))
    out = np.where(inv > _LOG_SPACE_THRESHOLD, deep, direct)
    out = np.clip(np.where(xi > 0, out, 0.0), 0.0, 1.0)
    return out if out.ndim else float(out)


def loss_probability(state: ThermalState, trap: TrapConfig) -> float:
    """Probability that an atom at ``state`` escapes a trap of ``trap.trap_depth``."""
    return loss_from_ratio(state.temperature / trap.trap_depth)


def max_scattered_photons(xi_target: float, trap: TrapConfig,
                          recoil: RecoilModel) -> PhotonBudget:
    """Photons that can be scattered before the temperature ratio reaches ``xi_target``.

    Returns ``PhotonBudget(0.0, False)`` when the initial temperature already
    meets or exceeds the target.
    """
    headroom = xi_target * trap.trap_depth - trap.initial_temperature
    if headroom <= 0:
        return PhotonBudget(0.0, False)
    return PhotonBudget(headroom / (2.0 * recoil.delta_t_per_event), True)
