"""
Monte Carlo checks of the analytic chain
========================================

Shot-level simulation draws counts, thermal energies and loss events
directly and should agree with the closed forms within a few standard
errors. The campaign simulation also shows two different notions of
"rate" for the adaptive strategy.
"""

import numpy as np
from _common import plt, save

from readout_opt import heating, throughput
from readout_opt.detection import bright_distribution, dark_distribution, discriminate
from readout_opt.montecarlo import SimConfig, simulate_campaign, simulate_fidelity, simulate_retention
from readout_opt.scenario import ReadoutScenario, load_scenario, with_parameter
from readout_opt.throughput import AdaptiveReset

sc = load_scenario("shallow_trap")
ro = sc.readout

# %%
# Fidelity

for tau in (20e-6, 100e-6, 300e-6):
    disc = discriminate(dark_distribution(sc.detector, tau),
                        bright_distribution(sc.detector, tau, ro.collection_efficiency, ro.scattering_rate))
    est = simulate_fidelity(SimConfig(sc, shots=10**6, seed=1), tau, disc.threshold)
    z = (est.value - disc.fidelity) / est.std_error
    print(f"tau={tau * 1e6:5.0f} us  F={disc.fidelity:.5f}  MC={est.value:.5f} +- {est.std_error:.5f}  z={z:+.2f}")

# %%
# Retention against temperature ratio

base = load_scenario("warm_atom")
xi = np.linspace(0.05, 0.6, 12)
mc, se = [], []
for k, x in enumerate(xi):
    s = with_parameter(base, "trap_depth", base.trap.initial_temperature / x)
    est = simulate_retention(SimConfig(s, shots=200_000, seed=k), 0.0)
    mc.append(est.value)
    se.append(est.std_error)
fig, ax = plt.subplots(figsize=(5, 3.2))
ax.plot(xi, 1 - heating.loss_from_ratio(xi), label="closed form")
ax.errorbar(xi, mc, yerr=3 * np.array(se), fmt=".", label="Monte Carlo (3 s.e.)")
ax.set_xlabel("T_atom / T_trap")
ax.set_ylabel("retention")
ax.legend()
save(fig, "retention_check")

# %%
# Two rates for the adaptive strategy
# -----------------------------------
# The analytic adaptive rate averages ``L / (t_dead + L t_cycle)`` over the
# run length ``L`` of each preparation. Total cycles divided by total time,
# the long-run renewal rate, weights long runs more and comes out higher.

timing = ReadoutScenario().timing
for p in (0.01, 0.1, 0.5):
    wall = 10**4 * (timing.dead_time + timing.cycle_time / p)
    est = simulate_campaign(SimConfig(ReadoutScenario(), seed=3), AdaptiveReset(), wall, p_loss_atom=p)
    print(f"p={p:4}: analytic {throughput.qcir_adaptive(p, timing).rate:7.3f} Hz, "
          f"per-preparation MC {est.value:7.3f} +- {est.std_error:.3f}, "
          f"wall-clock {est.wall_clock_rate:7.3f} Hz")
