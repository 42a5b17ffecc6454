"""
Information lost to imperfect readout
=====================================

Estimating a population ``P`` from readouts with fidelity ``F`` costs
precision. At ``P = 1/2`` the inverse-variance ratio to perfect readout is
exactly ``(2F - 1)^2``; elsewhere it is smaller. Averaging over a uniform
population gives a curve that sits below ``(2F - 1)^2``.
"""

import numpy as np
from _common import plt, save

from readout_opt.fisher import attenuation_ratio_at, attenuation_ratio_uniform

F = np.linspace(0.5, 1.0, 401)
info = (2 * F - 1) ** 2
uniform = np.array([attenuation_ratio_uniform(f) for f in F])
at_quarter = np.array([attenuation_ratio_at(f, 0.25) for f in F])

fig, ax = plt.subplots(figsize=(5, 3.2))
ax.plot(F, info, label="(2F-1)^2 = kappa(F, 1/2)")
ax.plot(F, at_quarter, label="kappa(F, 1/4)")
ax.plot(F, uniform, label="uniform average")
ax.set_xlabel("F")
ax.set_ylabel("kappa")
ax.legend(fontsize=8)
save(fig, "attenuation_ratio")

# %%
# The relative gap ``1 - kappa / (2F-1)^2`` is not constant. Near F = 1/2 it
# tends to 1/3, while at the fidelity where the curves are furthest apart it
# is about a fifth.

gap = info - uniform
k = int(np.argmax(gap))
rel = gap[1:] / info[1:]
print(f"largest absolute gap {gap[k]:.4f} at F={F[k]:.4f}, relative {100 * gap[k] / info[k]:.1f} %")
print(f"relative gap as F -> 1/2: {100 * rel[0]:.1f} %")
