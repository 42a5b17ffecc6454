"""Command-line front end: ``readout-opt <command> [options]``.

Commands write RFC-4180 CSV (header row, ``.`` decimal, 12 significant
digits) to ``--out`` or stdout. With ``--out`` a JSON run manifest is
written next to the CSV (``<out>.manifest.json``); ``readout-opt replay``
re-executes a manifest.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 Monte Carlo validation failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, detection, fisher, heating, montecarlo, optimizer, throughput
from .scenario import (
    SPD,
    SWEEP_PARAMETERS,
    Camera,
    ReadoutScenario,
    ScenarioError,
    dumps_scenario,
    load_scenario,
    loads_scenario,
    parse_quantity,
    with_parameter,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VALIDATION = 0, 2, 3, 4
DEFAULTS_ENV = "READOUT_OPT_DEFAULTS"

CSV_SCHEMAS = {
    "tradeoff": ("tradeoff/1", ["detector", "strategy", "atoms", "tau", "n_scattered",
                                "atom_temperature", "p_loss", "threshold", "fidelity",
                                "rate", "qfi", "block_length"]),
    "optimize": ("optimize/1", ["detector", "strategy", "atoms", "optimal_tau", "block_length",
                                "n_scattered", "atom_temperature", "p_loss", "threshold",
                                "fidelity", "rate", "qfi", "certified", "flags"]),
    "sweep": ("sweep/1", ["axis1", "axis1_value", "axis2", "axis2_value", "detector",
                          "strategy", "optimal_tau", "block_length", "fidelity", "rate", "qfi"]),
    "validate": ("validate/1", ["check", "analytic", "estimate", "std_error", "z",
                                "samples", "low_power", "passed"]),
    "kappa": ("kappa/1", ["fidelity", "kappa_half", "kappa_uniform", "relative_gap"]),
}


class ConfigError(Exception):
    pass


class ValidationFailed(Exception):
    pass


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------


def fmt(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.12g}"
    return str(value)


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Scenario resolution
# ---------------------------------------------------------------------------


def _base_scenario(args) -> ReadoutScenario:
    path = args.scenario or os.environ.get(DEFAULTS_ENV)
    if not path:
        return ReadoutScenario()
    return load_scenario(path)


def _apply_overrides(scenario: ReadoutScenario, args) -> ReadoutScenario:
    if getattr(args, "t_cycle", None):
        scenario = with_parameter(scenario, "cycle_time", parse_quantity(args.t_cycle, "time"))
    for item in getattr(args, "set", None) or []:
        name, _, value = item.partition("=")
        if not value:
            raise ConfigError(f"--set expects NAME=VALUE, got {item!r}")
        try:
            scenario = with_parameter(scenario, name.strip(), parse_quantity(value.strip()))
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from exc
    if getattr(args, "atoms", None) is not None:
        if args.atoms < 1:
            raise ConfigError("--atoms must be >= 1")
        scenario = scenario.replace(atom_count=args.atoms)
    return scenario


def _with_detector(scenario: ReadoutScenario, kind: str) -> ReadoutScenario:
    if kind == scenario.detector.kind:
        return scenario
    return scenario.replace(detector=SPD() if kind == "spd" else Camera())


def _detectors(scenario: ReadoutScenario, choice: str | None) -> list[ReadoutScenario]:
    if choice in (None, "scenario"):
        return [scenario]
    if choice == "both":
        return [_with_detector(scenario, "spd"), _with_detector(scenario, "camera")]
    return [_with_detector(scenario, choice)]


def _strategy(args) -> throughput.StrategyKind:
    return throughput.parse_strategy(args.strategy, getattr(args, "block_length", 1) or 1)


def _tau_bounds(args) -> tuple[float, float, int]:
    lo = parse_quantity(args.tau_min, "time")
    hi = parse_quantity(args.tau_max, "time")
    if args.tau_points < 1:
        raise ConfigError("--tau-points must be >= 1 (empty tau grid)")
    if not 0 <= lo < hi and args.tau_points > 1:
        raise ConfigError("--tau-min must be nonnegative and below --tau-max")
    return lo, hi, args.tau_points


def _parse_axis(spec: str) -> tuple[str, list[float]]:
    """``name=v1,v2,...`` or ``name=start:stop:count[:log|lin]``."""
    name, _, values = spec.partition("=")
    name = name.strip()
    if name not in SWEEP_PARAMETERS:
        raise ConfigError(f"unknown sweep parameter {name!r}; expected one of {SWEEP_PARAMETERS}")
    if not values:
        raise ConfigError(f"axis {name!r} has no values")
    if ":" in values:
        parts = values.split(":")
        if len(parts) not in (3, 4):
            raise ConfigError(f"bad range {values!r}")
        start, stop = parse_quantity(parts[0]), parse_quantity(parts[1])
        count = int(parts[2])
        spacing = parts[3] if len(parts) == 4 else "lin"
        if count < 1:
            raise ConfigError("axis needs at least one point")
        grid = np.geomspace(start, stop, count) if spacing == "log" else np.linspace(start, stop, count)
        return name, [float(v) for v in grid]
    return name, [parse_quantity(v.strip()) for v in values.split(",") if v.strip()]


# ---------------------------------------------------------------------------
# Commands. Each returns (csv_text, extra manifest fields, stderr notes).
# ---------------------------------------------------------------------------


def cmd_tradeoff(args, scenario):
    strategy = _strategy(args)
    lo, hi, n = _tau_bounds(args)
    spacing = "linear" if args.tau_linear else "log"
    if spacing == "log" and lo == 0:
        raise ConfigError("log-spaced tau grid needs --tau-min > 0 (or use --tau-linear)")
    grid = optimizer.TauGrid(lo, hi, n, spacing) if n > 1 else [lo]
    rows = []
    for sc in _detectors(scenario, args.detector):
        for p in optimizer.tradeoff_curve(sc, strategy, grid, threads=args.threads):
            rows.append([sc.detector.kind, strategy.name, sc.atom_count, p.tau, p.n_scattered,
                         p.atom_temperature, p.p_loss, p.threshold, p.fidelity, p.rate, p.qfi,
                         p.block_length])
    text = render_csv(CSV_SCHEMAS["tradeoff"][1], rows)
    return text, {"grid": {"tau_min": lo, "tau_max": hi, "points": n, "spacing": spacing}}, []


def _optimize_rows(scenarios, strategy, bounds, points, threads):
    rows, notes = [], []
    for sc in scenarios:
        res = optimizer.optimize_qfi(sc, strategy, bounds, points, threads=threads)
        a = res.achieved
        rows.append([sc.detector.kind, strategy.name, sc.atom_count, res.optimal_tau,
                     a.block_length, a.n_scattered, a.atom_temperature, a.p_loss, a.threshold,
                     a.fidelity, a.rate, a.qfi, res.certified, ";".join(res.flags)])
        notes.append(f"{sc.detector.kind}: Q={a.qfi:.4g} Hz, F={100 * a.fidelity:.2f}%, "
                     f"R={a.rate:.4g} Hz, tau={a.tau * 1e6:.3f} us"
                     + (f", n={a.block_length}" if isinstance(strategy, throughput.NonAdaptive) else ""))
    return rows, notes


def cmd_optimize(args, scenario):
    strategy = _strategy(args)
    lo, hi, n = _tau_bounds(args)
    rows, notes = _optimize_rows(_detectors(scenario, args.detector or "both"), strategy,
                                 (lo, hi), n, args.threads)
    text = render_csv(CSV_SCHEMAS["optimize"][1], rows)
    return text, {"grid": {"tau_min": lo, "tau_max": hi, "points": n}}, notes


def cmd_sweep(args, scenario):
    strategy = _strategy(args)
    lo, hi, n = _tau_bounds(args)
    axis1 = _parse_axis(args.axis1)
    axis2 = _parse_axis(args.axis2) if args.axis2 else None
    rows = []
    for sc in _detectors(scenario, args.detector or "both"):
        try:
            res = optimizer.sweep_2d(sc, axis1, axis2, strategy, (lo, hi), n, threads=args.threads)
        except (KeyError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc
        for i, row in enumerate(res.results):
            for j, cell in enumerate(row):
                a = cell.achieved
                rows.append([res.axis1[0], res.axis1[1][i], res.axis2[0] or "none",
                             res.axis2[1][j], sc.detector.kind, strategy.name, cell.optimal_tau,
                             a.block_length, a.fidelity, a.rate, a.qfi])
    text = render_csv(CSV_SCHEMAS["sweep"][1], rows)
    grid = {"tau_min": lo, "tau_max": hi, "points": n, "axis1": axis1,
            "axis2": axis2}
    return text, {"grid": grid}, []


def cmd_validate(args, scenario):
    tau = scenario.readout.readout_duration or 100e-6
    seed, shots, threads = args.seed, args.shots, args.threads
    low_power = shots < 1000
    rows = []

    def check(name, analytic, est):
        z = (est.value - analytic) / est.std_error if est.std_error > 0 else (
            0.0 if est.value == analytic else math.inf)
        passed = abs(z) <= 3.0
        rows.append([name, analytic, est.value, est.std_error, z, est.shots_used, low_power, passed])

    ro = scenario.readout
    dark = detection.dark_distribution(scenario.detector, tau)
    bright = detection.bright_distribution(scenario.detector, tau, ro.collection_efficiency,
                                           ro.scattering_rate)
    if isinstance(scenario.detector, Camera):
        bright = detection.bright_distribution_exact_camera(scenario.detector, tau,
                                                            ro.collection_efficiency,
                                                            ro.scattering_rate)
    disc = detection.discriminate(dark, bright)
    cfg = montecarlo.SimConfig(scenario, shots=shots, seed=seed)
    check("fidelity", disc.fidelity, montecarlo.simulate_fidelity(cfg, tau, disc.threshold, threads))

    recoil = heating.recoil_increment(scenario.species)
    state = heating.temperature_after(scenario.trap.initial_temperature,
                                      ro.scattering_rate * tau, recoil)
    p_loss = heating.loss_probability(state, scenario.trap)
    check("retention", 1.0 - p_loss,
          montecarlo.simulate_retention(montecarlo.SimConfig(scenario, shots, seed + 1), tau, threads))

    for p in (0.01, 0.1, 0.5):
        td, tc = scenario.timing.dead_time, scenario.timing.cycle_time
        wall = args.resets * (td + tc / p)
        single = scenario.replace(atom_count=1)
        est = montecarlo.simulate_campaign(montecarlo.SimConfig(single, shots, seed + 2),
                                           throughput.AdaptiveReset(), wall, p_loss_atom=p,
                                           threads=threads)
        check(f"adaptive_rate_p{p}", throughput.qcir_adaptive(p, scenario.timing).rate, est)

    text = render_csv(CSV_SCHEMAS["validate"][1], rows)
    notes = [f"{r[0]}: {'PASS' if r[-1] else 'FAIL'} (z={r[4]:+.2f})" for r in rows]
    if low_power:
        notes.append(f"low power: {shots} shots gives wide error bars")
    failed = [r[0] for r in rows if not r[-1]]
    extra = {"tau": tau, "resets": args.resets, "failed": failed}
    return text, extra, notes


def cmd_kappa(args, scenario):
    if args.points < 2:
        raise ConfigError("--points must be >= 2")
    fids = np.linspace(0.5, 1.0, args.points)
    rows = []
    for f in fids:
        half = fisher.attenuation_ratio_at(f, 0.5)
        uni = fisher.attenuation_ratio_uniform(f)
        gap = (half - uni) / half if half > 0 else math.nan
        rows.append([f, half, uni, gap])
    arr = np.array([[r[1], r[2]] for r in rows])
    rel = np.array([r[3] for r in rows[1:]])
    absdev = arr[:, 0] - arr[:, 1]
    k = int(np.argmax(absdev))
    notes = [
        f"max relative gap (over F > 0.5): {100 * np.nanmax(rel):.1f}% "
        f"(limit F -> 0.5 is 1/3)",
        f"relative gap at the largest absolute deviation "
        f"(F={fids[k]:.4f}, dk={absdev[k]:.4f}): {100 * rows[k][3]:.1f}%",
    ]
    return render_csv(CSV_SCHEMAS["kappa"][1], rows), {"grid": {"points": args.points}}, notes


COMMANDS = {
    "tradeoff": cmd_tradeoff,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "kappa": cmd_kappa,
}

GNUPLOT = {
    "tradeoff": "set logscale x\nset xlabel 'tau (s)'\nset ylabel 'Q (Hz)'\n"
                "plot '{csv}' using 4:11 with lines title 'Q', '' using 4:($9*200) with lines title 'F x 200'\n",
    "optimize": "set style data histograms\nplot '{csv}' using 11:xtic(1) title 'Q (Hz)'\n",
    "sweep": "set logscale x\nset xlabel 'axis1'\nset ylabel 'optimal Q (Hz)'\n"
             "plot '{csv}' using 2:11 with linespoints title 'Q'\n",
    "validate": "set style data histograms\nplot '{csv}' using 5:xtic(1) title 'z-score'\n",
    "kappa": "set xlabel 'F'\nset ylabel 'kappa'\n"
             "plot '{csv}' using 1:2 with lines title '(2F-1)^2', '' using 1:3 with lines title 'uniform'\n",
}


# ---------------------------------------------------------------------------
# Argument parsing and manifests
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="readout-opt", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, detector_default=None):
        p.add_argument("--scenario", help=f"scenario TOML path or bundled name "
                                          f"(default: ${DEFAULTS_ENV} or built-in defaults)")
        p.add_argument("--detector", choices=["spd", "camera", "both", "scenario"],
                       default=detector_default)
        p.add_argument("--atoms", type=int)
        p.add_argument("--t-cycle", help="override cycle time, e.g. '0.3 ms'")
        p.add_argument("--set", action="append", metavar="NAME=VALUE",
                       help=f"override a parameter ({', '.join(SWEEP_PARAMETERS)})")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", help="CSV output path (default stdout)")
        p.add_argument("--gnuplot", action="store_true", help="also write <out>.gp")

    def taus(p, points):
        p.add_argument("--strategy", default="adaptive",
                       choices=["adaptive", "nonadaptive", "blowaway"])
        p.add_argument("--tau-min", default="1 us")
        p.add_argument("--tau-max", default="20 ms")
        p.add_argument("--tau-points", type=int, default=points)

    p = sub.add_parser("tradeoff", help="evaluate the model chain on a tau grid")
    common(p)
    taus(p, 400)
    p.add_argument("--tau-linear", action="store_true")
    p.add_argument("--block-length", type=int, default=1)

    p = sub.add_parser("optimize", help="maximize Q over tau (and block length)")
    common(p)
    taus(p, optimizer.DEFAULT_POINTS)

    p = sub.add_parser("sweep", help="optimize over a one- or two-parameter grid")
    common(p)
    taus(p, optimizer.DEFAULT_POINTS)
    p.add_argument("--axis1", required=True, help="NAME=v1,v2,... or NAME=start:stop:count[:log]")
    p.add_argument("--axis2")

    p = sub.add_parser("validate", help="Monte Carlo checks of the analytic model")
    common(p)
    p.add_argument("--shots", type=int, default=10**6)
    p.add_argument("--resets", type=int, default=10**4)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("kappa", help="attenuation-ratio curves vs fidelity")
    common(p)
    p.add_argument("--points", type=int, default=501)

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", help="output path (default: the manifest's)")
    p.add_argument("--threads", type=int)
    return parser


def _manifest_options(args) -> dict[str, Any]:
    return {k: v for k, v in vars(args).items() if k not in ("out", "threads", "gnuplot")}


def _write_outputs(command: str, text: str, args, scenario: ReadoutScenario, extra: dict,
                   argv: Sequence[str], started: float) -> None:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_bytes(text.encode("utf-8"))
    digests = {out.name: hashlib.sha256(text.encode("utf-8")).hexdigest()}
    if args.gnuplot:
        gp = out.with_suffix(out.suffix + ".gp")
        script = GNUPLOT[command].format(csv=out.name)
        gp.write_text("set datafile separator ','\nset key autotitle columnhead\n" + script,
                      encoding="utf-8")
        digests[gp.name] = hashlib.sha256(gp.read_bytes()).hexdigest()
    manifest = {
        "tool": "readout-opt",
        "version": __version__,
        "command": command,
        "argv": list(argv),
        "options": _manifest_options(args),
        "threads": args.threads,
        "csv_schema": CSV_SCHEMAS[command][0],
        "scenario": scenario.to_dict(),
        "scenario_toml": dumps_scenario(scenario),
        "seed": getattr(args, "seed", None),
        "duration_s": round(time.perf_counter() - started, 6),
        "outputs": digests,
        **extra,
    }
    manifest_path = out.with_suffix(out.suffix + ".manifest.json")
    manifest_path.write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")


def _run(command: str, args, scenario: ReadoutScenario, argv: Sequence[str]) -> int:
    started = time.perf_counter()
    text, extra, notes = COMMANDS[command](args, scenario)
    if args.out:
        _write_outputs(command, text, args, scenario, extra, argv, started)
    else:
        sys.stdout.write(text)
    for line in notes:
        print(line, file=sys.stderr)
    if command == "validate" and extra.get("failed"):
        raise ValidationFailed(", ".join(extra["failed"]))
    return EXIT_OK


def _replay(args) -> tuple[str, argparse.Namespace, ReadoutScenario, list[str]]:
    try:
        manifest = json.loads(Path(args.manifest).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read manifest: {exc}") from exc
    command = manifest["command"]
    ns = argparse.Namespace(**manifest["options"])
    ns.out = args.out or str(Path(args.manifest).with_name(
        next(iter(manifest["outputs"]))))
    ns.threads = args.threads if args.threads is not None else manifest.get("threads", 1)
    ns.gnuplot = False
    # the snapshot already carries every override
    scenario = loads_scenario(manifest["scenario_toml"])
    ns.detector = ns.detector if ns.detector not in (None, "scenario") else None
    return command, ns, scenario, manifest["argv"]


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        if args.command == "replay":
            command, ns, scenario, orig_argv = _replay(args)
            return _run(command, ns, scenario, orig_argv)
        scenario = _apply_overrides(_base_scenario(args), args)
        return _run(args.command, args, scenario, argv)
    except (ConfigError, ScenarioError) as exc:
        print(f"readout-opt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationFailed as exc:
        print(f"readout-opt: Monte Carlo validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, KeyError, TypeError) as exc:
        print(f"readout-opt: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"readout-opt: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
