import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from readout_opt.heating import (
    RecoilModel,
    ThermalState,
    energy_pdf,
    log_loss_from_ratio,
    loss_from_ratio,
    loss_probability,
    max_scattered_photons,
    recoil_increment,
    temperature_after,
)
from readout_opt.scenario import AtomSpecies, TrapConfig

RB87 = AtomSpecies()
DT = 1.80978e-7  # frozen from an independent evaluation of (h/lambda)^2 / (2 k_B m)


def tail_by_quadrature(xi):
    # integral of u^2/2 e^-u from 1/xi to infinity, shifted so the peak sits at 0
    x0 = 1.0 / xi
    val, _ = integrate.quad(lambda v: 0.5 * (x0 + v) ** 2 * math.exp(-v), 0, np.inf,
                            epsabs=0, epsrel=1e-13)
    return val * math.exp(-x0)


def test_recoil_increment_rb87():
    assert math.isclose(recoil_increment(RB87).delta_t_per_event, DT, rel_tol=1e-5)


def test_recoil_scaling():
    base = recoil_increment(RB87).delta_t_per_event
    heavy = AtomSpecies(mass=2 * RB87.mass)
    red = AtomSpecies(readout_wavelength=2 * RB87.readout_wavelength)
    assert math.isclose(recoil_increment(heavy).delta_t_per_event, base / 2, rel_tol=1e-14)
    assert math.isclose(recoil_increment(red).delta_t_per_event, base / 4, rel_tol=1e-14)


def test_temperature_after_golden():
    state = temperature_after(100e-6, 950, recoil_increment(RB87))
    assert state.temperature == pytest.approx(443.9e-6, abs=0.05e-6)


def test_temperature_after_rejects_negative():
    with pytest.raises(ValueError):
        temperature_after(1e-4, -1, RecoilModel(DT))


def test_retention_golden():
    p = loss_probability(ThermalState(300e-6), TrapConfig(2e-3, 100e-6))
    assert 1 - p == pytest.approx(0.962, abs=5e-4)


def test_loss_limits():
    assert loss_from_ratio(0.0) == 0.0
    assert loss_from_ratio(1e-4) == 0.0
    assert 0 < loss_from_ratio(1e-2) < 1e-38
    assert loss_from_ratio(1e9) == pytest.approx(1.0, abs=1e-9)
    assert np.isfinite(log_loss_from_ratio(1e-4))


def test_energy_pdf_normalized():
    state = ThermalState(3e-4)
    val, _ = integrate.quad(lambda t: energy_pdf(t, state), 0, np.inf)
    assert val == pytest.approx(1.0, abs=1e-10)
    assert energy_pdf(-1.0, state) == 0.0


@given(st.floats(0.01, 10.0))
def test_loss_matches_tail_quadrature(xi):
    assert math.isclose(loss_from_ratio(xi), tail_by_quadrature(xi), rel_tol=1e-8)


@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_loss_monotone_in_ratio(a, b):
    lo, hi = sorted((a, b))
    assert loss_from_ratio(lo) <= loss_from_ratio(hi)


def test_loss_vectorized():
    xi = np.array([0.0, 0.1, 1.0, 10.0])
    out = loss_from_ratio(xi)
    assert out.shape == xi.shape
    assert all(out[i] == loss_from_ratio(x) for i, x in enumerate(xi))


def test_photon_budget_round_trip():
    trap = TrapConfig(1e-3, 100e-6)
    recoil = RecoilModel(DT)
    budget = max_scattered_photons(0.3, trap, recoil)
    assert budget.feasible
    temp = temperature_after(trap.initial_temperature, budget.n_scattered, recoil).temperature
    assert temp == pytest.approx(0.3 * trap.trap_depth, rel=1e-12)


def test_photon_budget_without_headroom():
    assert max_scattered_photons(0.05, TrapConfig(1e-3, 100e-6), RecoilModel(DT)) == (0.0, False)
