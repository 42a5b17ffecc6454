"""Experimental parameter set for a readout scenario.

Every quantity is stored in SI units (kelvin, seconds, hertz, kilograms,
meters). Config files may carry human units such as ``"5 mK"`` or
``"0.3 %"``; they are converted exactly through :func:`parse_quantity`.

The dataclasses here do not validate on construction, so that an invalid
parameter set can still be built and inspected with :func:`validate`.
:func:`load_scenario` does validate and raises :class:`ScenarioError`.
"""

from __future__ import annotations

import dataclasses
import math
import os
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, NamedTuple, Union

import numpy as np
from scipy.optimize import least_squares

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "AtomSpecies",
    "TrapConfig",
    "TimingConfig",
    "ReadoutConfig",
    "SPD",
    "Camera",
    "DetectorModel",
    "ReadoutScenario",
    "ValidationReport",
    "ScenarioError",
    "UnitError",
    "RB87",
    "SWEEP_PARAMETERS",
    "parse_quantity",
    "validate",
    "load_scenario",
    "loads_scenario",
    "save_scenario",
    "dumps_scenario",
    "builtin_scenarios",
    "resolve_scenario_path",
    "with_parameter",
    "SaturationFit",
    "saturation_model",
    "fit_saturation_scan",
]


class ScenarioError(ValueError):
    """Raised when a scenario file cannot be parsed or fails validation."""


class UnitError(ScenarioError):
    """Unknown or mismatched unit suffix in a quantity string."""


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AtomSpecies:
    """Atomic species driven by the readout laser.

    Attributes
    ----------
    mass : float
        Atomic mass in kg.
    readout_wavelength : float
        Wavelength of the readout transition in m.
    natural_linewidth : float
        Natural linewidth Gamma/2pi in Hz. Use :attr:`gamma` for the
        decay rate in 1/s.
    """

    mass: float = 1.44316e-25
    readout_wavelength: float = 780.241e-9
    natural_linewidth: float = 6.0666e6

    @property
    def gamma(self) -> float:
        """Decay rate Gamma = 2pi * linewidth, in 1/s."""
        return 2.0 * math.pi * self.natural_linewidth


RB87 = AtomSpecies()


@dataclass(frozen=True)
class TrapConfig:
    trap_depth: float = 1e-3
    initial_temperature: float = 100e-6


@dataclass(frozen=True)
class TimingConfig:
    dead_time: float = 0.2
    cycle_time: float = 5e-3


@dataclass(frozen=True)
class ReadoutConfig:
    """Readout laser and collection path.

    ``readout_duration`` is only used where a single fixed duration is
    needed (Monte Carlo runs, validation); optimizers scan it.
    """

    scattering_rate: float = 9.5e6
    collection_efficiency: float = 0.003
    readout_duration: float = 0.0


@dataclass(frozen=True)
class SPD:
    """Single-photon detector with Poissonian dark counts (rate in Hz)."""

    dark_rate: float = 500.0

    kind = "spd"


@dataclass(frozen=True)
class Camera:
    """Frame camera with Gaussian, time-independent readout noise in counts."""

    noise_mean: float = 360.0
    noise_sigma: float = 4.0

    kind = "camera"


DetectorModel = Union[SPD, Camera]


@dataclass(frozen=True)
class ReadoutScenario:
    species: AtomSpecies = field(default_factory=AtomSpecies)
    trap: TrapConfig = field(default_factory=TrapConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    readout: ReadoutConfig = field(default_factory=ReadoutConfig)
    detector: DetectorModel = field(default_factory=SPD)
    atom_count: int = 1

    def replace(self, **changes: Any) -> "ReadoutScenario":
        """Return a copy with top-level fields replaced."""
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        """Flat-ish dict of SI values, as written into run manifests."""
        out = dataclasses.asdict(self)
        out["detector"] = {"kind": self.detector.kind, **dataclasses.asdict(self.detector)}
        return out


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _positive(value: Any) -> bool:
    return isinstance(value, (int, float)) and math.isfinite(value) and value > 0


def validate(scenario: ReadoutScenario) -> ValidationReport:
    """List every violated invariant of ``scenario``; empty means valid."""
    bad: list[str] = []
    warn: list[str] = []
    sp, tr, tm, ro, det = (scenario.species, scenario.trap, scenario.timing,
                           scenario.readout, scenario.detector)

    for name in ("mass", "readout_wavelength", "natural_linewidth"):
        if not _positive(getattr(sp, name)):
            bad.append(f"species.{name} > 0")

    if not _positive(tr.trap_depth):
        bad.append("trap_depth > 0")
    if not _positive(tr.initial_temperature):
        bad.append("initial_temperature > 0")
    if not tr.initial_temperature < tr.trap_depth:
        bad.append("initial_temperature < trap_depth")

    if not _positive(tm.dead_time):
        bad.append("dead_time > 0")
    if not _positive(tm.cycle_time):
        bad.append("cycle_time > 0")
    if _positive(tm.dead_time) and _positive(tm.cycle_time) and tm.cycle_time >= tm.dead_time:
        warn.append("cycle_time < dead_time")

    if not _positive(ro.scattering_rate):
        bad.append("scattering_rate > 0")
    if not (ro.collection_efficiency > 0):
        bad.append("collection_efficiency > 0")
    if not (ro.collection_efficiency <= 1):
        bad.append("collection_efficiency <= 1")
    if not (ro.readout_duration >= 0):
        bad.append("readout_duration >= 0")

    if isinstance(det, SPD):
        if not (det.dark_rate >= 0):
            bad.append("dark_rate >= 0")
    elif isinstance(det, Camera):
        if not (det.noise_mean >= 0):
            bad.append("noise_mean >= 0")
        if not _positive(det.noise_sigma):
            bad.append("noise_sigma > 0")
    else:
        bad.append("detector is SPD or Camera")

    if not (isinstance(scenario.atom_count, (int, np.integer)) and scenario.atom_count >= 1):
        bad.append("atom_count >= 1")

    return ValidationReport(tuple(bad), tuple(warn))


# ---------------------------------------------------------------------------
# Units and config files
# ---------------------------------------------------------------------------

# suffix -> (dimension, exact scale to SI)
_UNITS: dict[str, tuple[str, Decimal]] = {
    "K": ("temperature", Decimal(1)),
    "mK": ("temperature", Decimal("1e-3")),
    "uK": ("temperature", Decimal("1e-6")),
    "μK": ("temperature", Decimal("1e-6")),
    "µK": ("temperature", Decimal("1e-6")),
    "nK": ("temperature", Decimal("1e-9")),
    "s": ("time", Decimal(1)),
    "ms": ("time", Decimal("1e-3")),
    "us": ("time", Decimal("1e-6")),
    "μs": ("time", Decimal("1e-6")),
    "µs": ("time", Decimal("1e-6")),
    "ns": ("time", Decimal("1e-9")),
    "Hz": ("frequency", Decimal(1)),
    "kHz": ("frequency", Decimal("1e3")),
    "MHz": ("frequency", Decimal("1e6")),
    "GHz": ("frequency", Decimal("1e9")),
    "kg": ("mass", Decimal(1)),
    "amu": ("mass", Decimal("1.66053906660e-27")),
    "m": ("length", Decimal(1)),
    "um": ("length", Decimal("1e-6")),
    "μm": ("length", Decimal("1e-6")),
    "µm": ("length", Decimal("1e-6")),
    "nm": ("length", Decimal("1e-9")),
    "%": ("fraction", Decimal("0.01")),
    "": ("any", Decimal(1)),
}

_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(\S*)\s*$")

# (section, key) -> (field name, dimension)
_SCHEMA: dict[str, dict[str, tuple[str, str]]] = {
    "species": {
        "mass": ("mass", "mass"),
        "readout_wavelength": ("readout_wavelength", "length"),
        "wavelength": ("readout_wavelength", "length"),
        "natural_linewidth": ("natural_linewidth", "frequency"),
        "linewidth": ("natural_linewidth", "frequency"),
    },
    "trap": {
        "trap_depth": ("trap_depth", "temperature"),
        "initial_temperature": ("initial_temperature", "temperature"),
    },
    "timing": {
        "dead_time": ("dead_time", "time"),
        "cycle_time": ("cycle_time", "time"),
    },
    "readout": {
        "scattering_rate": ("scattering_rate", "frequency"),
        "collection_efficiency": ("collection_efficiency", "fraction"),
        "eta": ("collection_efficiency", "fraction"),
        "readout_duration": ("readout_duration", "time"),
        "tau": ("readout_duration", "time"),
    },
    "spd": {"dark_rate": ("dark_rate", "frequency")},
    "camera": {
        "noise_mean": ("noise_mean", "count"),
        "noise_sigma": ("noise_sigma", "count"),
    },
}


def parse_quantity(value: Any, dimension: str = "any") -> float:
    """Convert ``"NUMBER UNIT"`` (or a bare SI number) to an SI float.

    The scaling is done in decimal arithmetic, so ``"100 uK"`` and
    ``0.0001`` give the same float.

    >>> parse_quantity("5 mK", "temperature")
    0.005
    >>> parse_quantity("0.3 %")
    0.003
    """
    if isinstance(value, bool):
        raise UnitError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise UnitError(f"expected a number or quantity string, got {value!r}")
    match = _QUANTITY.match(value)
    if match is None:
        raise UnitError(f"cannot parse quantity {value!r}")
    number, suffix = match.groups()
    if suffix not in _UNITS:
        raise UnitError(f"unknown unit {suffix!r} in {value!r}")
    unit_dim, scale = _UNITS[suffix]
    if suffix and dimension == "count":
        raise UnitError(f"counts are dimensionless, got unit {suffix!r}")
    if suffix and dimension not in ("any", unit_dim):
        raise UnitError(f"unit {suffix!r} is a {unit_dim}, expected a {dimension}")
    try:
        return float(Decimal(number) * scale)
    except InvalidOperation as exc:  # pragma: no cover - regex guards this
        raise UnitError(f"bad number in {value!r}") from exc


def _section(data: dict[str, Any], name: str, schema_name: str | None = None) -> dict[str, float]:
    raw = data.get(name, {})
    if not isinstance(raw, dict):
        raise ScenarioError(f"[{name}] must be a table")
    schema = _SCHEMA[schema_name or name]
    out: dict[str, float] = {}
    for key, value in raw.items():
        if key == "kind":
            continue
        if key not in schema:
            raise ScenarioError(f"unknown key {key!r} in [{name}]")
        field_name, dim = schema[key]
        if field_name in out:
            raise ScenarioError(f"[{name}] sets {field_name} twice")
        out[field_name] = parse_quantity(value, dim)
    return out


def _from_mapping(data: dict[str, Any]) -> ReadoutScenario:
    known = {"species", "trap", "timing", "readout", "detector", "atom_count"}
    unknown = set(data) - known
    if unknown:
        raise ScenarioError(f"unknown top-level keys: {sorted(unknown)}")

    det_raw = data.get("detector", {"kind": "spd"})
    if not isinstance(det_raw, dict):
        raise ScenarioError("[detector] must be a table")
    kind = det_raw.get("kind", "spd")
    if kind == "spd":
        detector: DetectorModel = SPD(**_section(data, "detector", "spd"))
    elif kind == "camera":
        detector = Camera(**_section(data, "detector", "camera"))
    else:
        raise ScenarioError(f"detector kind must be 'spd' or 'camera', got {kind!r}")

    atom_count = data.get("atom_count", 1)
    if isinstance(atom_count, bool) or not isinstance(atom_count, int):
        raise ScenarioError("atom_count must be an integer")

    return ReadoutScenario(
        species=AtomSpecies(**_section(data, "species")),
        trap=TrapConfig(**_section(data, "trap")),
        timing=TimingConfig(**_section(data, "timing")),
        readout=ReadoutConfig(**_section(data, "readout")),
        detector=detector,
        atom_count=atom_count,
    )


def loads_scenario(text: str) -> ReadoutScenario:
    """Parse and validate scenario TOML text."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ScenarioError(f"malformed scenario file: {exc}") from exc
    scenario = _from_mapping(data)
    report = validate(scenario)
    if not report.ok:
        raise ScenarioError("invalid scenario: " + "; ".join(report.violations))
    return scenario


_BUILTIN_DIR = Path(__file__).with_name("scenarios")


def builtin_scenarios() -> dict[str, Path]:
    """Bundled scenario files keyed by stem (``eta1_5mK`` etc.)."""
    return {p.stem: p for p in sorted(_BUILTIN_DIR.glob("*.toml"))}


def resolve_scenario_path(name: str | os.PathLike[str]) -> Path:
    """Map a path or a bundled scenario name to an existing file."""
    path = Path(name)
    if path.exists():
        return path
    builtins = builtin_scenarios()
    if str(name) in builtins:
        return builtins[str(name)]
    raise ScenarioError(f"scenario file not found: {name}")


def load_scenario(path: str | os.PathLike[str]) -> ReadoutScenario:
    """Load a TOML scenario file; missing fields take the 87Rb defaults.

    ``path`` may also name a bundled scenario (see :func:`builtin_scenarios`).
    """
    resolved = resolve_scenario_path(path)
    try:
        text = resolved.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ScenarioError(f"{resolved}: not UTF-8") from exc
    return loads_scenario(text)


def dumps_scenario(scenario: ReadoutScenario) -> str:
    """Serialize with bare SI numbers; ``repr`` keeps floats round-trip exact."""
    def block(name: str, obj: Any, extra: dict[str, str] | None = None) -> str:
        lines = [f"[{name}]"]
        for key, val in (extra or {}).items():
            lines.append(f'{key} = "{val}"')
        for f in dataclasses.fields(obj):
            lines.append(f"{f.name} = {float(getattr(obj, f.name))!r}")
        return "\n".join(lines)

    parts = [
        f"atom_count = {int(scenario.atom_count)}",
        block("species", scenario.species),
        block("trap", scenario.trap),
        block("timing", scenario.timing),
        block("readout", scenario.readout),
        block("detector", scenario.detector, {"kind": scenario.detector.kind}),
    ]
    return "\n\n".join(parts) + "\n"


def save_scenario(scenario: ReadoutScenario, path: str | os.PathLike[str]) -> None:
    Path(path).write_text(dumps_scenario(scenario), encoding="utf-8")


# ---------------------------------------------------------------------------
# Named parameter access for sweeps
# ---------------------------------------------------------------------------

SWEEP_PARAMETERS = (
    "eta",
    "trap_depth",
    "initial_temperature",
    "dark_rate",
    "noise_sigma",
    "cycle_time",
    "dead_time",
)


def with_parameter(scenario: ReadoutScenario, name: str, value: float) -> ReadoutScenario:
    """Copy of ``scenario`` with one sweepable parameter set to ``value`` (SI)."""
    value = float(value)
    if name == "eta":
        return scenario.replace(
            readout=dataclasses.replace(scenario.readout, collection_efficiency=value))
    if name in ("trap_depth", "initial_temperature"):
        return scenario.replace(trap=dataclasses.replace(scenario.trap, **{name: value}))
    if name in ("cycle_time", "dead_time"):
        return scenario.replace(timing=dataclasses.replace(scenario.timing, **{name: value}))
    if name == "dark_rate":
        if not isinstance(scenario.detector, SPD):
            raise ValueError("dark_rate applies only to an SPD detector")
        return scenario.replace(detector=SPD(dark_rate=value))
    if name == "noise_sigma":
        if not isinstance(scenario.detector, Camera):
            raise ValueError("noise_sigma applies only to a camera detector")
        return scenario.replace(detector=dataclasses.replace(scenario.detector, noise_sigma=value))
    raise KeyError(f"unknown sweep parameter {name!r}; expected one of {SWEEP_PARAMETERS}")


# ---------------------------------------------------------------------------
# Saturation-scan calibration
# ---------------------------------------------------------------------------


class SaturationFit(NamedTuple):
    eta: float
    k: float
    residual_norm: float
    nfev: int


def saturation_model(intensity, eta: float, k: float, linewidth: float,
                     saturation_intensity: float):
    """Collected photon rate ``eta * Gamma/2 * kI / (kI + I_sat)``.

    ``linewidth`` is Gamma/2pi in Hz, as in :class:`AtomSpecies`.
    """
    gamma = 2.0 * math.pi * linewidth
    ki = k * np.asarray(intensity, dtype=float)
    return eta * 0.5 * gamma * ki / (ki + saturation_intensity)


def fit_saturation_scan(points, linewidth: float, saturation_intensity: float,
                        max_nfev: int = 200) -> SaturationFit:
    """Least-squares estimate of collection efficiency and intensity factor.

    Parameters
    ----------
    points : sequence of (intensity, collected_rate)
        Intensities in W/m^2 (positive, not all equal) and collected
        photon rates in Hz. At least three points.
    linewidth : float
        Gamma/2pi of the readout transition in Hz.
    saturation_intensity : float
        I_sat in W/m^2.

    Returns
    -------
    SaturationFit
        Fitted ``eta`` and ``k``, the residual norm in Hz, and the number
        of model evaluations.
    """
    data = np.asarray(points, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise ValueError("points must be a sequence of (intensity, rate) pairs")
    if len(data) < 3:
        raise ValueError("need at least 3 points")
    intensity, rate = data[:, 0], data[:, 1]
    if np.any(intensity <= 0) or not np.all(np.isfinite(data)):
        raise ValueError("intensities must be positive and finite")
    if np.ptp(intensity) == 0:
        raise ValueError("degenerate scan: all intensities are equal")

    half_gamma = math.pi * linewidth
    scale = np.max(np.abs(rate))
    if scale <= 0:
        raise ValueError("collected rates are all zero")
    x = intensity / saturation_intensity

    # unknowns (eta, k); residuals normalized by the largest rate
    def residuals(p):
        eta, k = p
        return (eta * half_gamma * k * x / (k * x + 1.0) - rate) / scale

    def jacobian(p):
        eta, k = p
        denom = k * x + 1.0
        d_eta = half_gamma * k * x / denom
        d_k = eta * half_gamma * x / denom**2
        return np.column_stack([d_eta, d_k]) / scale

    p0 = np.array([scale / half_gamma, 0.5])
    sol = least_squares(residuals, p0, jac=jacobian, bounds=([0.0, 0.0], [np.inf, np.inf]),
                        method="trf", x_scale="jac", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                        max_nfev=max_nfev)
    if sol.status <= 0:
        raise RuntimeError(f"saturation fit did not converge: {sol.message}")
    eta, k = (float(v) for v in sol.x)
    resid = float(np.linalg.norm(sol.fun) * scale)
    return SaturationFit(eta, k, resid, int(sol.nfev))
