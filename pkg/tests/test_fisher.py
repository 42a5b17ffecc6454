import math

import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from readout_opt.fisher import (
    LabelSwapWarning,
    attenuation_ratio_at,
    attenuation_ratio_uniform,
    fisher_binomial,
    information_point,
    measured_population,
    normalized_qfi,
    single_shot_info,
)


def test_single_shot_info_endpoints():
    assert single_shot_info(1.0) == 1.0
    assert single_shot_info(0.5) == 0.0
    assert single_shot_info(0.75) == 0.25


def test_label_swap_warns():
    with pytest.warns(LabelSwapWarning):
        assert single_shot_info(0.2) == pytest.approx(single_shot_info(0.8))


def test_out_of_range_fidelity():
    with pytest.raises(ValueError):
        single_shot_info(1.1)
    with pytest.raises(ValueError):
        normalized_qfi(-1.0, 0.9)


@given(st.floats(0.5, 1.0), st.floats(0, 1e4))
def test_qfi_bounds(f, r):
    q = normalized_qfi(r, f)
    assert 0 <= q <= r
    pt = information_point(f, r)
    assert pt.normalized_qfi == q and pt.single_shot_info == (2 * f - 1) ** 2


def test_fisher_binomial_perfect_readout_reduces_to_population_information():
    p = 0.3
    assert fisher_binomial(p, 1.0) == pytest.approx(1 / (p * (1 - p)))
    with pytest.raises(ValueError):
        fisher_binomial(0.0, 1.0)


@given(st.floats(0.5, 1.0), st.floats(1e-3, 1 - 1e-3))
def test_attenuation_is_fisher_ratio(f, p):
    # chain rule through the measured population: dP_m/dP = 2F - 1
    pm = measured_population(p, f)
    ratio = fisher_binomial(pm, 2 * f - 1) / fisher_binomial(p, 1.0)
    assert math.isclose(attenuation_ratio_at(f, p), ratio, rel_tol=1e-9, abs_tol=1e-15)


@given(st.floats(0.5, 1.0))
def test_attenuation_at_half_equals_info(f):
    assert abs(attenuation_ratio_at(f, 0.5) - single_shot_info(f)) <= 1e-12


def test_uniform_endpoints():
    assert attenuation_ratio_uniform(1.0) == 1.0
    assert attenuation_ratio_uniform(0.5) == 0.0


@given(st.floats(0.5, 1.0))
def test_uniform_matches_plain_quadrature(f):
    ref, _ = integrate.quad(lambda p: attenuation_ratio_at(f, p), 1e-12, 1 - 1e-12, limit=200)
    assert attenuation_ratio_uniform(f) == pytest.approx(ref, abs=1e-9)
    assert attenuation_ratio_uniform(f) <= single_shot_info(f) + 1e-12
