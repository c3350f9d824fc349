# %% [markdown]
# # Quantum-jump unravelling
#
# Ensembles of pure-state trajectories reproduce the master equation.  Every
# trajectory owns a random stream seeded by (seed, index), so the result
# does not depend on how the work is split between processes.

# %%
import numpy as np

from atomarray_om import dynamics as dyn
from atomarray_om import trajectories as trj
from atomarray_om.fock import HilbertDims, fig4_model

dims = HilbertDims(4, 16)
p = fig4_model()
est = trj.steady_estimates(p, dims, trj.TrajectoryConfig(n_traj=2000, seed=0))
rho = dyn.evolve(dyn.vacuum_state(dims), dyn.model_liouvillian(p, dims), 30.0)

n, g = est["n_photon"], est["g2"]
print(f"<a'a>: {n.mean:.5f} +- {n.std_error:.5f}   master equation {dyn.photon_number(rho):.5f}")
print(f"g2(0): {g.mean:.4f} +- {g.std_error:.4f}   master equation {dyn.g2_zero(rho):.4f}")

# %%
res = est["result"]
jumps = np.array([len(j) for j in res.jump_times])
print(f"mean number of jumps per trajectory {jumps.mean():.3f}, max {jumps.max()}")

# %% the split between processes leaves results unchanged
a = trj.run_ensemble(p, dims, trj.TrajectoryConfig(n_traj=40, seed=5))
b = trj.run_ensemble(p, dims, trj.TrajectoryConfig(n_traj=40, seed=5, n_jobs=2))
print("identical:", all(np.array_equal(a.values[k], b.values[k]) for k in a.values))
