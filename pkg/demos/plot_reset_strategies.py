"""
Array reset strategies for a 100-atom register
==============================================

Every circuit cycle risks losing an atom. The adaptive strategy reloads
the array as soon as an existence check reports a loss. The non-adaptive
strategy runs blocks of ``n`` cycles and discards every cycle after the
first loss. Destructive readout reloads after every cycle.
"""

import numpy as np
from _common import plt, save

from readout_opt import throughput
from readout_opt.optimizer import best_block_length, optimize_qfi
from readout_opt.scenario import Camera, load_scenario
from readout_opt.throughput import AdaptiveReset, BlowAway, NonAdaptive

sc = load_scenario("array100")
timing = sc.timing

# %%
# Rate against per-atom loss
# --------------------------

p = np.geomspace(1e-9, 1e-1, 200)
adaptive = [throughput.qcir_adaptive_array(x, sc.atom_count, timing).rate for x in p]
fixed = [best_block_length(x, sc.atom_count, timing)[1] for x in p]
fig, ax = plt.subplots(figsize=(5, 3.2))
ax.loglog(p, adaptive, label="adaptive")
ax.loglog(p, fixed, label="non-adaptive, best n")
ax.axhline(throughput.qcir_fixed(1, timing), color="k", lw=0.8, label="blow-away")
ax.set_xlabel("per-atom loss per cycle")
ax.set_ylabel("rate (Hz)")
ax.legend(fontsize=8)
save(fig, "reset_strategies")

# %%
# Jointly optimal window and block length
# ---------------------------------------

for det in (sc.detector, Camera()):
    s = sc.replace(detector=det)
    for strategy in (AdaptiveReset(), NonAdaptive(), BlowAway()):
        res = optimize_qfi(s, strategy)
        a = res.achieved
        extra = f" n={res.optimal_block_length}" if res.optimal_block_length else ""
        print(f"{det.kind:6s} {strategy.name:11s} Q={a.qfi:8.2f} Hz F={100 * a.fidelity:6.2f} % "
              f"R={a.rate:7.2f} Hz{extra}")

# %%
# A faster cycle raises the ceiling twentyfold.

fast = load_scenario("array100_fast")
for det in (fast.detector, Camera()):
    a = optimize_qfi(fast.replace(detector=det), AdaptiveReset()).achieved
    print(f"0.3 ms {det.kind:6s} Q={a.qfi:8.1f} Hz F={100 * a.fidelity:6.2f} % R={a.rate:7.1f} Hz")
