# %% [markdown]
# # Delayed coincidences
#
# After a photon leaves, the membrane is left displaced and rings at
# omega_m.  With no mechanical damping the ringing never dies, which is why
# g2(tau) settles into undamped oscillation instead of returning to 1.

# %%
import math

import numpy as np

from atomarray_om import dynamics as dyn
from atomarray_om.fock import HilbertDims, fig4_model

dims = HilbertDims(4, 16)
p = fig4_model()
tau = np.linspace(0.0, 40 / p.kappa, 1200)

for label, q in (("blockade", p), ("bunching", fig4_model(delta_L=-p.G - 1.0))):
    s = dyn.g2_tau_weak(q, dims, tau)
    f = dyn.dominant_frequency(s)
    print(f"{label:9s} g2(0)={s.g2_0:.3f}  late mean={s.long_time_limit:.3f}  frequency={f:.4f} omega_m")

# %% [markdown]
# Mechanical damping restores g2(tau) -> 1; this needs the master equation.

# %%
q = fig4_model().replace(gamma_m=0.05)
small = HilbertDims(3, 10)
L = dyn.model_liouvillian(q, small)
rho = dyn.steady_state(L, method="null_space")
s = dyn.g2_tau(rho, L, np.linspace(0, 40 / q.kappa, 400))
print(f"damped: g2(0)={s.g2_0:.3f}, g2 at 40/kappa={s.values[-1]:.3f}")
print("phonon occupation after a click:", np.round(dyn.weak_drive_solution(p, dims).phonon_population_after_click[:5], 4))
print("ringing period 2pi/omega_m =", round(2 * math.pi, 3))
