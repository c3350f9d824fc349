# %% [markdown]
# # The array as a mirror
#
# Collective decay of a square array, its Gaussian-mode mixing, and how
# position disorder leaks light out of the cavity mode.

# %%
import numpy as np

from atomarray_om import lattice as lat

lam = 800e-9
a = 0.6 * lam
spec = lat.LatticeSpec(60, 60, a, lam, 6 * a)

k0 = lat.collective_shift_decay(spec, (0.0, 0.0))
print(f"Gamma_0/gamma = {k0.decay_over_gamma:.6f}, shift/gamma = {k0.shift_over_gamma:+.4f}")
print(f"diffraction oracle   {lat.diffraction_order_decay(spec, (0, 0)):.6f}")

# %% dispersion along Gamma -> X (the zone edge sits at q lambda / 2a = 0.83 q)
for f in (0.0, 0.2, 0.4, 0.6, 0.8):
    s = lat.collective_shift_decay(spec, (f * spec.q, 0.0))
    print(f"kx/q={f:.1f}  shift={s.shift_over_gamma:+.4f}  decay={s.decay_over_gamma:.4f}")

# %% mode mixing falls as the array grows
ks = [(0.0, 0.0), (0.3 * spec.q, 0.0)]
for n in (20, 40, 80):
    G = lat.mode_mixing_kernel(spec.resized(n, n), ks)
    print(n, np.round(abs(G[0, 1]), 4))

# %% disorder scan, quadratic in eta
scan = lat.disorder_scattering_scan(
    spec.resized(40, 40), lat.DisorderConfig(eta_grid=(0.05, 0.1, 0.2), n_samples=10, seed=0))
print(scan.summary())
