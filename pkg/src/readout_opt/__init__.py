"""Readout-duration optimization for neutral-atom qubit arrays.

The package chains a recoil-heating and atom-loss model, photon-count
distributions for single-photon detectors and cameras, array reset
strategies, and an information-rate metric, then maximizes that metric
over the readout duration.
"""

__version__ = "0.1.0"

from . import detection, fisher, heating, montecarlo, optimizer, scenario, throughput
from .detection import DiscriminationResult, discriminate
from .optimizer import TradeoffPoint, optimize_qfi, sweep_2d, tradeoff_curve
from .scenario import (
    SPD,
    AtomSpecies,
    Camera,
    ReadoutConfig,
    ReadoutScenario,
    TimingConfig,
    TrapConfig,
    load_scenario,
)
from .throughput import AdaptiveReset, BlowAway, NonAdaptive

__all__ = [
    "__version__",
    "scenario",
    "heating",
    "detection",
    "throughput",
    "fisher",
    "optimizer",
    "montecarlo",
    "AtomSpecies",
    "TrapConfig",
    "TimingConfig",
    "ReadoutConfig",
    "SPD",
    "Camera",
    "ReadoutScenario",
    "load_scenario",
    "DiscriminationResult",
    "discriminate",
    "TradeoffPoint",
    "tradeoff_curve",
    "optimize_qfi",
    "sweep_2d",
    "BlowAway",
    "AdaptiveReset",
    "NonAdaptive",
]
