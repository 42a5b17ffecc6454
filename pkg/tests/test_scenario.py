import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from readout_opt.scenario import (
    SPD,
    Camera,
    ReadoutScenario,
    ScenarioError,
    TrapConfig,
    UnitError,
    builtin_scenarios,
    dumps_scenario,
    fit_saturation_scan,
    load_scenario,
    loads_scenario,
    parse_quantity,
    saturation_model,
    save_scenario,
    validate,
    with_parameter,
)


def test_default_scenario_is_valid():
    report = validate(ReadoutScenario())
    assert report.ok and report.violations == () and report.warnings == ()


def test_hot_atom_violates_trap_invariant():
    sc = ReadoutScenario(trap=TrapConfig(trap_depth=1e-3, initial_temperature=2e-3))
    assert "initial_temperature < trap_depth" in validate(sc).violations


def test_efficiency_above_one_is_rejected():
    sc = ReadoutScenario()
    bad = sc.replace(readout=dataclasses.replace(sc.readout, collection_efficiency=1.2))
    assert "collection_efficiency <= 1" in validate(bad).violations


def test_slow_cycle_only_warns():
    sc = with_parameter(ReadoutScenario(), "cycle_time", 0.3)
    report = validate(sc)
    assert report.ok and report.warnings


def test_validate_does_not_mutate():
    sc = ReadoutScenario()
    before = sc.to_dict()
    validate(sc)
    assert sc.to_dict() == before


@pytest.mark.parametrize("text, dim, expected", [
    ("100 uK", "temperature", 1e-4),
    ("100 μK", "temperature", 1e-4),
    ("1 mK", "temperature", 1e-3),
    ("0.3 %", "fraction", 0.003),
    ("9.5 MHz", "frequency", 9.5e6),
    ("200 ms", "time", 0.2),
    ("780.241 nm", "length", 780.241e-9),
    ("0.3ms", "time", 3e-4),
    (5, "any", 5.0),
])
def test_parse_quantity(text, dim, expected):
    assert parse_quantity(text, dim) == expected


@pytest.mark.parametrize("text, dim", [("3 furlongs", "any"), ("1 mK", "time"), ("abc", "any")])
def test_parse_quantity_errors(text, dim):
    with pytest.raises(ScenarioError):
        parse_quantity(text, dim)


def test_unknown_unit_is_unit_error():
    with pytest.raises(UnitError):
        parse_quantity("1 parsec", "length")


def test_every_bundled_scenario_loads_and_validates():
    names = builtin_scenarios()
    assert {"default", "shallow_trap", "eta03_1mK", "eta1_5mK", "array100", "array100_fast"} <= set(names)
    for name in names:
        assert validate(load_scenario(name)).ok, name


def test_round_trip_through_toml(tmp_path):
    sc = load_scenario("array100_fast")
    path = tmp_path / "s.toml"
    save_scenario(sc, path)
    assert load_scenario(path) == sc
    assert loads_scenario(dumps_scenario(sc)) == sc


def test_unknown_key_rejected():
    text = dumps_scenario(ReadoutScenario()).replace("[trap]", "[trap]\nbogus = 1")
    with pytest.raises(ScenarioError):
        loads_scenario(text)


def test_malformed_file_is_parse_error():
    with pytest.raises(ScenarioError):
        loads_scenario("[trap\n")


def test_camera_section():
    text = dumps_scenario(ReadoutScenario(detector=Camera(noise_mean=350, noise_sigma=3)))
    sc = loads_scenario(text)
    assert sc.detector == Camera(noise_mean=350, noise_sigma=3)


def test_with_parameter():
    sc = ReadoutScenario()
    assert with_parameter(sc, "eta", 0.01).readout.collection_efficiency == 0.01
    assert with_parameter(sc, "trap_depth", 5e-3).trap.trap_depth == 5e-3
    assert with_parameter(sc, "dark_rate", 100).detector == SPD(100)
    with pytest.raises(KeyError):
        with_parameter(sc, "colour", 1)
    with pytest.raises(ValueError):
        with_parameter(sc, "noise_sigma", 2)


@given(st.floats(1e-4, 0.05), st.floats(0.1, 3.0))
def test_saturation_fit_recovers_parameters(eta, k):
    linewidth, i_sat = 6.0666e6, 16.7
    intensity = np.geomspace(1, 400, 12)
    rates = saturation_model(intensity, eta, k, linewidth, i_sat)
    fit = fit_saturation_scan(list(zip(intensity, rates)), linewidth, i_sat)
    assert math.isclose(fit.eta, eta, rel_tol=1e-6)
    assert math.isclose(fit.k, k, rel_tol=1e-6)


def test_saturation_fit_needs_three_points():
    with pytest.raises(ValueError):
        fit_saturation_scan([(1.0, 1.0), (2.0, 2.0)], 6e6, 16.7)
