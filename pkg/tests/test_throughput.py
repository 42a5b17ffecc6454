import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from readout_opt.scenario import TimingConfig
from readout_opt.throughput import (
    AdaptiveReset,
    BlowAway,
    NonAdaptive,
    _adaptive_integral,
    array_loss,
    parse_strategy,
    qcir_adaptive,
    qcir_adaptive_array,
    qcir_adaptive_series,
    qcir_fixed,
    qcir_nonadaptive,
)

TIMING = TimingConfig(dead_time=0.2, cycle_time=5e-3)

# frozen from a 10^7-term direct summation of n/(td + n tc) p q^(n-1)
ADAPTIVE_GOLDEN = {
    1e-3: 177.755371865,
    0.01: 116.566718253,
    0.1: 35.4039762478,
    0.5: 9.32127735521,
}


def brute_force(p, timing, terms=10**7):
    n = np.arange(1, terms + 1, dtype=float)
    w = p * np.exp((n - 1) * math.log1p(-p))
    return float(np.sum(n / (timing.dead_time + n * timing.cycle_time) * w))


def test_limits_exact():
    assert math.isclose(qcir_adaptive(0.0, TIMING).rate, 200.0, rel_tol=1e-9)
    assert math.isclose(qcir_adaptive(1.0, TIMING).rate, 1 / 0.205, rel_tol=1e-9)
    assert qcir_adaptive(0.0, TIMING).expected_run_length == math.inf


def test_blowaway_rate():
    assert qcir_fixed(1, TIMING) == pytest.approx(4.878, abs=5e-4)


@pytest.mark.parametrize("p, expected", sorted(ADAPTIVE_GOLDEN.items()))
def test_adaptive_golden(p, expected):
    assert qcir_adaptive(p, TIMING).rate == pytest.approx(expected, rel=1e-10)


def test_adaptive_against_brute_force():
    assert qcir_adaptive(0.1, TIMING).rate == pytest.approx(brute_force(0.1, TIMING), rel=1e-12)


@given(st.floats(1e-3, 0.9))
def test_series_and_integral_agree(p):
    assert math.isclose(qcir_adaptive_series(p, TIMING), _adaptive_integral(p, TIMING), rel_tol=1e-10)


@given(st.floats(0, 1), st.floats(1e-3, 1.0), st.floats(1e-5, 1e-2))
def test_adaptive_bounds(p, td, tc):
    timing = TimingConfig(td, tc)
    rate = qcir_adaptive(p, timing).rate
    assert 1 / (td + tc) * (1 - 1e-12) <= rate <= 1 / tc * (1 + 1e-12)


def test_adaptive_strictly_decreasing():
    rates = [qcir_adaptive(p, TIMING).rate for p in np.linspace(0, 1, 100)]
    assert np.all(np.diff(rates) < 0)


def test_array_loss():
    assert array_loss(0.1, 1) == pytest.approx(0.1, rel=1e-15)
    assert array_loss(1e-12, 100) == pytest.approx(1e-10, rel=1e-6)
    assert array_loss(1.0, 5) == 1.0
    with pytest.raises(ValueError):
        array_loss(0.1, 0)


def test_hundred_atom_adaptive_golden():
    # the analytic value at this loss is 198.443..., not the 199.7 quoted for it elsewhere
    assert qcir_adaptive_array(3.2e-7, 100, TIMING).rate == pytest.approx(198.443416804, rel=1e-9)


def test_nonadaptive_golden():
    assert qcir_nonadaptive(1.27e-7, 100, 4149, TIMING).rate == pytest.approx(193.0, abs=0.1)


def test_nonadaptive_lossless_matches_fixed():
    for n in (1, 10, 1000):
        assert qcir_nonadaptive(0.0, 7, n, TIMING).rate == pytest.approx(qcir_fixed(n, TIMING), rel=1e-15)


@given(st.floats(1e-9, 0.5), st.integers(1, 500), st.integers(1, 5000))
def test_nonadaptive_matches_direct_sum(p, atoms, n):
    s = (1 - p) ** atoms
    kept = sum(s**k for k in range(1, min(n, 5000) + 1))
    got = qcir_nonadaptive(p, atoms, n, TIMING)
    assert math.isclose(got.expected_run_length, kept, rel_tol=1e-8)


def test_strategies():
    assert isinstance(parse_strategy("adaptive"), AdaptiveReset)
    assert isinstance(parse_strategy("blow-away"), BlowAway)
    assert parse_strategy("nonadaptive", 7) == NonAdaptive(7)
    with pytest.raises(ValueError):
        parse_strategy("sometimes")
    with pytest.raises(ValueError):
        NonAdaptive(0)
    with pytest.raises(ValueError):
        qcir_adaptive(1.5, TIMING)
