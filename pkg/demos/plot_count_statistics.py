"""
Photon counts and threshold discrimination
==========================================

A bright atom scatters photons for a window ``tau``; a dark atom does not.
Both produce background counts, Poisson dark counts on a single-photon
detector and a broad Gaussian readout floor on a camera. A single integer
threshold separates the two count distributions, and the best threshold
changes in unit steps as ``tau`` grows, which leaves kinks in F(tau).
"""

import numpy as np
from _common import plt, save

from readout_opt.detection import (
    bright_distribution,
    bright_distribution_exact_camera,
    dark_distribution,
    discriminate,
    fidelity_curve,
    threshold_segments,
)
from readout_opt.scenario import Camera, load_scenario

spd = load_scenario("shallow_trap")
cam = spd.replace(detector=Camera())
ro = spd.readout

# %%
# Count distributions at 100 us
# -----------------------------
# With 0.3 % collection the bright atom yields about 2.85 detected photons,
# on top of 0.05 dark counts. Counting one photon is already enough to call
# the atom bright.

tau = 100e-6
dark = dark_distribution(spd.detector, tau)
bright = bright_distribution(spd.detector, tau, ro.collection_efficiency, ro.scattering_rate)
res = discriminate(dark, bright)
print(f"SPD: threshold {res.threshold}, F = {res.fidelity:.5f}")

fig, axes = plt.subplots(1, 2, figsize=(9, 3.2))
axes[0].bar(dark.support - 0.2, dark.pmf, width=0.4, label="dark")
axes[0].bar(bright.support + 0.2, bright.pmf, width=0.4, label="bright")
axes[0].set_xlim(-0.5, 12)
axes[0].set_xlabel("counts")
axes[0].legend()

# %%
# The camera sees the same signal ten times longer, on top of a floor of
# 360 +- 4 counts. The Gaussian approximation of the bright state is close
# to the exact noise-signal convolution.

tau_cam = 1e-3
cdark = dark_distribution(cam.detector, tau_cam)
capprox = bright_distribution(cam.detector, tau_cam, ro.collection_efficiency, ro.scattering_rate)
cexact = bright_distribution_exact_camera(cam.detector, tau_cam, ro.collection_efficiency, ro.scattering_rate)
for name, dist in (("approx", capprox), ("exact", cexact)):
    print(f"camera {name}: F = {discriminate(cdark, dist).fidelity:.5f}")
axes[1].plot(cdark.support, cdark.pmf, label="dark")
axes[1].plot(capprox.support, capprox.pmf, label="bright (Gaussian)")
axes[1].plot(cexact.support, cexact.pmf, ":", label="bright (exact)")
axes[1].set_xlim(330, 430)
axes[1].set_xlabel("counts")
axes[1].legend(fontsize=8)
save(fig, "count_statistics")

# %%
# Fidelity against window length
# ------------------------------

taus = np.linspace(0, 2e-3, 801)
f_spd = [r.fidelity for _, r in fidelity_curve(spd, taus)]
f_cam = [r.fidelity for _, r in fidelity_curve(cam, taus)]
segments = threshold_segments(fidelity_curve(spd, taus))
print("SPD threshold runs (us):")
for first, last, n in segments[:6]:
    print(f"  n_th={n}: {first * 1e6:7.1f} .. {last * 1e6:7.1f}")

fig, ax = plt.subplots(figsize=(5, 3.2))
ax.plot(taus * 1e6, f_spd, label="SPD")
ax.plot(taus * 1e6, f_cam, label="camera")
ax.set_xlabel("tau (us)")
ax.set_ylabel("F")
ax.legend()
save(fig, "fidelity_vs_tau")
