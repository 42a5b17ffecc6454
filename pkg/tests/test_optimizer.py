import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from readout_opt import detection, fisher, heating, throughput
from readout_opt.optimizer import (
    TauGrid,
    best_block_length,
    evaluate_point,
    optimize_qfi,
    sweep_2d,
    tradeoff_curve,
)
from readout_opt.scenario import SPD, Camera, load_scenario, with_parameter
from readout_opt.throughput import AdaptiveReset, BlowAway, NonAdaptive

ADAPTIVE = AdaptiveReset()


def test_zero_duration_point(shallow):
    p = evaluate_point(shallow, ADAPTIVE, 0.0)
    assert p.fidelity == 0.5 and p.qfi == 0.0
    assert p.p_loss == heating.loss_from_ratio(shallow.trap.initial_temperature / shallow.trap.trap_depth)


def test_point_is_internally_consistent():
    sc = load_scenario("eta03_5mK")
    p = evaluate_point(sc, ADAPTIVE, 37e-6)
    ro = sc.readout
    recoil = heating.recoil_increment(sc.species)
    assert p.n_scattered == ro.scattering_rate * p.tau
    state = heating.temperature_after(sc.trap.initial_temperature, p.n_scattered, recoil)
    assert p.atom_temperature == state.temperature
    assert p.p_loss == heating.loss_probability(state, sc.trap)
    disc = detection.discriminate(
        detection.dark_distribution(sc.detector, p.tau),
        detection.bright_distribution(sc.detector, p.tau, ro.collection_efficiency, ro.scattering_rate))
    assert (p.threshold, p.fidelity) == (disc.threshold, disc.fidelity)
    assert p.rate == throughput.qcir_adaptive(p.p_loss, sc.timing).rate
    assert p.qfi == fisher.normalized_qfi(p.rate, p.fidelity)


def test_grid_validation(shallow):
    with pytest.raises(ValueError):
        tradeoff_curve(shallow, ADAPTIVE, [])
    with pytest.raises(ValueError):
        tradeoff_curve(shallow, ADAPTIVE, [2e-6, 1e-6])
    assert len(tradeoff_curve(shallow, ADAPTIVE, TauGrid(1e-6, 1e-3, 17))) == 17


def test_weak_shallow_curve_passes_reference_point():
    sc = load_scenario("eta03_1mK")
    curve = tradeoff_curve(sc, ADAPTIVE, TauGrid(1e-6, 1e-3, 2000))
    assert any(abs(p.fidelity - 0.7583) <= 0.015 and abs(p.rate / 35.1 - 1) <= 0.05 for p in curve)


def test_deep_trap_retains_more():
    shallow, deep = load_scenario("shallow_trap"), load_scenario("deep_trap")
    taus = np.linspace(1e-6, 3e-3, 200)
    for a, b in zip(tradeoff_curve(shallow, ADAPTIVE, taus), tradeoff_curve(deep, ADAPTIVE, taus)):
        assert b.p_loss <= a.p_loss


def test_strong_deep_spd_optimum():
    res = optimize_qfi(load_scenario("eta1_5mK"), ADAPTIVE)
    a = res.achieved
    assert a.qfi == pytest.approx(193.8, rel=0.05)
    assert a.fidelity == pytest.approx(0.9956, abs=0.015)
    assert a.rate == pytest.approx(197.2, rel=0.05)
    assert res.certified and res.flags == ()


def test_noiseless_detector_prefers_shortest_window():
    sc = load_scenario("eta1_5mK").replace(detector=SPD(0.0))
    sc = with_parameter(sc, "eta", 1.0)
    res = optimize_qfi(sc, ADAPTIVE, (1e-6, 1e-3), points=100)
    # the optimum sits within a few microseconds of the lower bound, where F is ~1
    assert res.optimal_tau < 5e-6
    assert res.achieved.fidelity > 0.9999


def test_no_information_flag():
    sc = load_scenario("eta1_5mK")
    sc = with_parameter(sc, "eta", 0.0)
    res = optimize_qfi(sc, ADAPTIVE, (1e-6, 1e-5), 10)
    assert "no-information" in res.flags
    assert res.achieved.rate == max(p.rate for p in tradeoff_curve(sc, ADAPTIVE, [1e-6]))


def test_bad_bounds():
    with pytest.raises(ValueError):
        optimize_qfi(load_scenario("eta1_5mK"), ADAPTIVE, (1e-3, 1e-6))


def test_refinement_is_converged():
    sc = load_scenario("eta03_5mK")
    a = optimize_qfi(sc, ADAPTIVE).achieved.qfi
    b = optimize_qfi(sc, ADAPTIVE, points=800).achieved.qfi
    assert abs(a - b) / b < 1e-3


def test_weak_deep_spd_single_peak():
    sc = load_scenario("eta03_5mK")
    q = np.array([p.qfi for p in tradeoff_curve(sc, ADAPTIVE, TauGrid(1e-6, 20e-3, 400))])
    top = q >= q.max() * (1 - 1e-9)
    assert np.count_nonzero(np.diff(top.astype(int)) == 1) + int(top[0]) == 1
    # rises before the peak region and falls after it, up to threshold kinks
    k = int(np.argmax(q))
    assert q[:k].max() < q[k] and q[k + 1:].max() < q[k]


def test_blowaway_rate_is_constant(shallow):
    pts = tradeoff_curve(shallow, BlowAway(), [1e-5, 1e-4, 1e-3])
    assert {p.rate for p in pts} == {1 / 0.205}


def test_nonadaptive_hundred_atoms():
    res = optimize_qfi(load_scenario("array100"), NonAdaptive())
    assert res.optimal_block_length == pytest.approx(4149, rel=0.2)
    assert res.achieved.qfi == pytest.approx(188.8, rel=0.05)
    assert isinstance(res.strategy, NonAdaptive)
    assert res.strategy.block_length == res.optimal_block_length


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-9, 1e-2), st.integers(1, 200))
def test_block_length_is_optimal(p, atoms):
    timing = load_scenario("array100").timing
    n, rate, unimodal = best_block_length(p, atoms, timing)
    assert unimodal
    for m in (max(1, n - 1), n + 1, max(1, n // 2), 2 * n):
        assert throughput.qcir_nonadaptive(p, atoms, m, timing).rate <= rate * (1 + 1e-12)


def test_sweep_degenerate_grid_matches_optimize():
    sc = load_scenario("eta03_1mK")
    res = sweep_2d(sc, ("eta", [0.003]), ("trap_depth", [1e-3]), ADAPTIVE)
    direct = optimize_qfi(sc, ADAPTIVE)
    assert res.results[0][0] == direct
    assert res.qfi_matrix().shape == (1, 1)


def test_sweep_unknown_axis():
    with pytest.raises(KeyError):
        sweep_2d(load_scenario("eta03_1mK"), ("colour", [1.0]), None, ADAPTIVE)


def test_optimal_q_rises_with_eta():
    sc = load_scenario("eta_sweep")
    res = sweep_2d(sc, ("eta", np.geomspace(1e-3, 0.05, 8)), None, ADAPTIVE, points=200)
    q = res.qfi_matrix()[:, 0]
    assert np.all(np.diff(q) >= -1e-9 * q[1:])


def test_threads_do_not_change_results():
    sc = load_scenario("eta1_1mK")
    assert optimize_qfi(sc, ADAPTIVE, threads=1) == optimize_qfi(sc, ADAPTIVE, threads=3)


def _cold_camera(eta, depth):
    sc = load_scenario("eta03_1mK").replace(detector=Camera())
    sc = with_parameter(with_parameter(sc, "eta", eta), "trap_depth", depth)
    return with_parameter(sc, "initial_temperature", 0.0)


@pytest.mark.parametrize("c", [0.5, 2.0, 4.0])
def test_eta_trap_scaling_exact_on_matched_grid(c):
    # a power-of-two factor keeps every product exact, so the curves coincide bitwise
    taus = np.geomspace(1e-6, 5e-3, 300)
    by_eta = tradeoff_curve(_cold_camera(c * 0.003, 1e-3), ADAPTIVE, taus)
    by_trap = tradeoff_curve(_cold_camera(0.003, c * 1e-3), ADAPTIVE, c * taus)
    for a, b in zip(by_eta, by_trap):
        assert (a.fidelity, a.rate, a.p_loss) == (b.fidelity, b.rate, b.p_loss)
        assert a.n_scattered * c * 0.003 == b.n_scattered * 0.003


@settings(max_examples=10, deadline=None)
@given(st.floats(0.3, 5.0))
def test_eta_trap_scaling_of_optimum(c):
    by_eta = optimize_qfi(_cold_camera(c * 0.003, 1e-3), ADAPTIVE, (1e-6, 20e-3))
    by_trap = optimize_qfi(_cold_camera(0.003, c * 1e-3), ADAPTIVE, (c * 1e-6, c * 20e-3))
    a, b = by_eta.achieved, by_trap.achieved
    assert math.isclose(a.qfi, b.qfi, rel_tol=1e-9)
    assert math.isclose(a.fidelity, b.fidelity, rel_tol=1e-9)
    assert math.isclose(a.rate, b.rate, rel_tol=1e-9)
    assert math.isclose(a.n_scattered * c * 0.003, b.n_scattered * 0.003, rel_tol=1e-9)
