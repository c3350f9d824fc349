"""Monte Carlo wavefunction (quantum-jump) unravelling of the cavity model.

Between jumps a trajectory evolves under ``H_eff = H - (i/2) sum_j r_j
L_j' L_j``.  ``H_eff`` is time independent, so the no-jump evolution is
exact: it is diagonalised once and the squared norm can be evaluated at
any time.  The jump time is where the squared norm reaches a uniform
random threshold and is located by bisection.  ``dt_max`` therefore only
sets the output sampling; it never limits accuracy.

Each trajectory draws from its own stream seeded with ``(seed, index)``,
and ensembles are reduced in index order, so results are bit-identical
for any ``n_jobs``.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .dynamics import model_jumps
from .fock import HilbertDims, ModelParams, QOperator, basis_state, build_hamiltonian, ladder

__all__ = [
    "TrajectoryConfig",
    "TrajectoryEstimate",
    "EnsembleResult",
    "run_ensemble",
    "steady_estimates",
    "g2_zero_mcwf",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrajectoryConfig:
    """Ensemble settings.  Times are in units of 1/kappa."""

    n_traj: int = 2000
    seed: int = 0
    dt_max: float = 0.5
    jump_tol: float = 1e-10
    t_max: float = 30.0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_traj < 1:
            raise ValueError("n_traj must be >= 1")
        if not (self.dt_max > 0 and self.t_max > 0 and self.jump_tol > 0):
            raise ValueError("dt_max, t_max and jump_tol must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.n_jobs < 1:
            raise ValueError("n_jobs must be >= 1")


@dataclass(frozen=True)
class TrajectoryEstimate:
    mean: float
    std_error: float
    n_traj: int
    note: str = ""


@dataclass
class EnsembleResult:
    """Per-time ensemble averages of normalised-state expectations."""

    times: np.ndarray
    values: dict
    jump_times: list
    n_traj: int

    def mean(self, name: str) -> np.ndarray:
        return self.values[name].mean(axis=0)

    def stderr(self, name: str) -> np.ndarray:
        v = self.values[name]
        if v.shape[0] < 2:
            return np.zeros(v.shape[1])
        return v.std(axis=0, ddof=1) / math.sqrt(v.shape[0])

    def estimate(self, name: str, index: int = -1) -> TrajectoryEstimate:
        return TrajectoryEstimate(float(self.mean(name)[index]), float(self.stderr(name)[index]),
                                  self.n_traj)


class _NoJumpPropagator:
    """Exact ``exp(-i H_eff t)`` through an eigendecomposition, with a
    matrix-exponential fallback when the eigenbasis is ill conditioned."""

    def __init__(self, Heff: np.ndarray, cond_max: float = 1e8):
        self.Heff = Heff
        lam, V = np.linalg.eig(Heff)
        self.use_eig = np.linalg.cond(V) < cond_max
        if self.use_eig:
            self.lam, self.V, self.Vinv = lam, V, np.linalg.inv(V)
        else:
            log.info("H_eff eigenbasis ill conditioned; using expm propagation")

    def coeffs(self, psi):
        return self.Vinv @ psi if self.use_eig else psi

    def at(self, c, t):
        if self.use_eig:
            return self.V @ (np.exp(-1j * self.lam * t) * c)
        return sla.expm(-1j * self.Heff * t) @ c


def _setup(params: ModelParams, dims: HilbertDims):
    if not params.kappa > 0:
        raise ValueError("trajectories need kappa > 0")
    H = build_hamiltonian(params, dims).toarray()
    jumps = [(r, op.toarray()) for r, op in model_jumps(params, dims)]
    Heff = H - 0.5j * sum(r * (L.conj().T @ L) for r, L in jumps)
    return _NoJumpPropagator(Heff), jumps


def _default_observables(dims: HilbertDims) -> dict:
    a = ladder(dims, "photon")
    b = ladder(dims, "phonon")
    ad = a.dag()
    return {
        "n_photon": (ad @ a).toarray(),
        "a2_a2": (ad @ ad @ a @ a).toarray(),
        "n_phonon": (b.dag() @ b).toarray(),
    }


def _run_chunk(args):
    (prop, jumps, obs, psi0, t_grid, seed, indices, tol) = args
    names = list(obs)
    out = np.empty((len(indices), len(names), len(t_grid)))
    jump_log = []
    for row, idx in enumerate(indices):
        rng = np.random.default_rng([int(seed), int(idx)])
        psi = psi0.copy()
        c = prop.coeffs(psi)
        t0 = 0.0
        thresh = rng.uniform()
        jumps_here = []
        for it, t in enumerate(t_grid):
            while True:
                phi = prop.at(c, t - t0)
                nrm = np.vdot(phi, phi).real
                if nrm > thresh:
                    break
                # jump inside (t_prev, t]: locate where the norm hits the threshold
                lo = t_grid[it - 1] - t0 if it > 0 else 0.0
                lo = max(lo, 0.0)

                def f(s):
                    p = prop.at(c, s)
                    return np.vdot(p, p).real - thresh

                tj = brentq(f, lo, t - t0, xtol=tol, rtol=4 * np.finfo(float).eps) if f(lo) > 0 else lo
                phi = prop.at(c, tj)
                w = np.array([r * np.vdot(L @ phi, L @ phi).real for r, L in jumps])
                k = int(np.searchsorted(np.cumsum(w) / w.sum(), rng.uniform(), side="right"))
                k = min(k, len(jumps) - 1)
                psi = jumps[k][1] @ phi
                psi /= np.linalg.norm(psi)
                t0 = t0 + tj
                jumps_here.append(t0)
                c = prop.coeffs(psi)
                thresh = rng.uniform()
            phi = phi / math.sqrt(nrm)
            for j, name in enumerate(names):
                out[row, j, it] = np.vdot(phi, obs[name] @ phi).real
        jump_log.append(jumps_here)
    return out, jump_log


def run_ensemble(params: ModelParams, dims: HilbertDims = HilbertDims(),
                 cfg: TrajectoryConfig = TrajectoryConfig(), observables=None,
                 psi0: np.ndarray | None = None) -> EnsembleResult:
    """Trajectory ensemble sampled every ``<= dt_max`` up to ``t_max``.

    ``observables`` maps names to operators (:class:`QOperator` or dense
    arrays); the default records ``n_photon``, ``a2_a2`` (a'a'aa) and
    ``n_phonon``.  The initial state defaults to the joint vacuum.
    """
    prop, jumps = _setup(params, dims)
    obs = _default_observables(dims) if observables is None else {
        k: (v.toarray() if isinstance(v, QOperator) else np.asarray(v, dtype=complex))
        for k, v in dict(observables).items()}
    psi0 = basis_state(dims, 0, 0) if psi0 is None else np.asarray(psi0, dtype=complex)
    psi0 = psi0 / np.linalg.norm(psi0)
    n_out = int(math.ceil(cfg.t_max / cfg.dt_max))
    t_grid = np.linspace(0.0, cfg.t_max, n_out + 1) / params.kappa

    idx = np.arange(cfg.n_traj)
    chunks = np.array_split(idx, min(cfg.n_jobs * 4, cfg.n_traj)) if cfg.n_jobs > 1 else [idx]
    tasks = [(prop, jumps, obs, psi0, t_grid, cfg.seed, ch, cfg.jump_tol / params.kappa)
             for ch in chunks]
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(cfg.n_jobs) as ex:
            parts = list(ex.map(_run_chunk, tasks))
    else:
        parts = [_run_chunk(t) for t in tasks]
    data = np.concatenate([p[0] for p in parts], axis=0)
    jump_log = [j for p in parts for j in p[1]]
    values = {name: data[:, j, :] for j, name in enumerate(obs)}
    return EnsembleResult(times=t_grid * params.kappa, values=values,
                          jump_times=[np.asarray(j) * params.kappa for j in jump_log],
                          n_traj=cfg.n_traj)


def _ratio_estimate(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """mean(x)/mean(y)^2 and its delta-method standard error."""
    n = len(x)
    mx, my = x.mean(), y.mean()
    R = mx / my**2
    if n < 2:
        return float(R), 0.0
    C = np.cov(np.vstack([x, y]), ddof=1)
    gx, gy = 1 / my**2, -2 * mx / my**3
    var = (gx * gx * C[0, 0] + gy * gy * C[1, 1] + 2 * gx * gy * C[0, 1]) / n
    return float(R), float(math.sqrt(max(var, 0.0)))


def steady_estimates(params: ModelParams, dims: HilbertDims = HilbertDims(),
                     cfg: TrajectoryConfig = TrajectoryConfig()) -> dict:
    """``n_photon`` and ``g2`` estimates from the states at ``t_max``."""
    if cfg.t_max < 30:
        raise ValueError("steady estimates need t_max >= 30/kappa")
    res = run_ensemble(params, dims, cfg)
    n = res.values["n_photon"][:, -1]
    n2 = res.values["a2_a2"][:, -1]
    if n.mean() <= 1e-14:
        raise ValueError("photon number too small for g2")
    g2, se = _ratio_estimate(n2, n)
    note = ""
    if se > 0.1 * abs(g2):
        note = f"standard error {se:.2e} exceeds 10% of the estimate; increase n_traj"
        warnings.warn(note, RuntimeWarning, stacklevel=2)
    return {
        "n_photon": res.estimate("n_photon"),
        "g2": TrajectoryEstimate(g2, se, cfg.n_traj, note),
        "result": res,
    }


def g2_zero_mcwf(params: ModelParams, dims: HilbertDims = HilbertDims(),
                 cfg: TrajectoryConfig = TrajectoryConfig()) -> TrajectoryEstimate:
    """g2(0) = <a'a'aa>/<a'a>^2 from wavefunction averages at ``t_max``."""
    return steady_estimates(params, dims, cfg)["g2"]
