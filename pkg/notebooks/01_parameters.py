# %% [markdown]
# # From hardware to model parameters
#
# Start from cavity and trap hardware and end with the three ratios that
# control everything downstream: g/omega_m, kappa/omega_m and G/kappa.

# %%
import math

import numpy as np

from atomarray_om import params as prm

cfg = prm.fig3_config()
p = prm.derive_params(cfg)
for name in ("g", "kappa_c", "kappa_sc", "kappa", "omega_m"):
    print(f"{name:9s} {getattr(p, name) / (2 * math.pi):12.1f} x 2pi Hz")
print(f"g/omega_m = {p.g / p.omega_m:.3f}   kappa/omega_m = {p.kappa / p.omega_m:.3f}")

# %% [markdown]
# Scattering out of the cavity mode is quadratic in the Lamb-Dicke
# parameter, while g is linear in it, so a stiffer trap trades coupling
# for linewidth.

# %%
for eta in (0.05, 0.1, 0.15, 0.2, 0.3):
    q = prm.derive_params(cfg.replace(lamb_dicke=eta))
    m = prm.regime_margins(q)
    print(f"eta={eta:4.2f}  g/kappa={q.g / q.kappa:6.3f}  sideband={m.sideband:+.2f}  blockade={m.blockade:+.2f}")

# %% [markdown]
# The same formulas applied to an existing high-finesse rubidium cavity.

# %%
hem = prm.derive_params(prm.hem_config())
print(f"omega_m/2pi = {hem.omega_m / (2 * math.pi) / 1e3:.1f} kHz, g/kappa = {hem.g / hem.kappa:.2f}")

# %% Regime map over cavity length and waist
lengths = np.geomspace(5e-3, 0.1, 12)
waists = np.linspace(5e-6, 60e-6, 12)
rows = prm.sweep_regime_map(cfg, ("cavity_length", lengths), ("waist", waists))
good = sum(r.valid and r.sideband > 0 and r.blockade > 0 for r in rows)
print(f"{good} of {len(rows)} grid points are sideband resolved and blockaded")
