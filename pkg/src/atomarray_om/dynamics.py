"""Driven-dissipative dynamics of the optomechanical model.

Two engines live here.

* The Lindblad engine works on the full superoperator: time evolution,
  steady states (time march from the joint vacuum, or the trace-one kernel
  vector), and two-time correlations through the quantum regression
  theorem.
* The weak-drive engine keeps the leading order in the drive amplitude of
  the no-jump (conditional) wavefunction started from the joint vacuum.
  One- and two-photon amplitudes come from two linear solves and
  ``g2(tau)`` from propagating the post-detection state.  This is the
  ``Omega << kappa`` limit with the mechanics starting in its ground state.

Without mechanical damping the Lindblad problem has no physically useful
stationary state: each scattered photon kicks the undamped phonon mode,
and the population random-walks up to the phonon cutoff on a time scale
~ kappa / Omega^2.  The time march then never meets its residual threshold
and the kernel vector depends on the truncation.  Blockade-point
observables are therefore taken from the weak-drive engine, and the
Lindblad engine checks them at finite drive.

Superoperators act on row-major vectorised density matrices,
``vec(A X B) = kron(A, B.T) vec(X)``.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp
from scipy.signal import detrend

from .fock import (
    DensityMatrix,
    HilbertDims,
    ModelParams,
    QOperator,
    build_hamiltonian,
    basis_state,
    ladder,
)

__all__ = [
    "SimControl",
    "Liouvillian",
    "CorrelationSeries",
    "SweepRow",
    "AuditReport",
    "WeakDriveSolution",
    "NonConvergenceError",
    "UndefinedCorrelationError",
    "build_liouvillian",
    "model_jumps",
    "model_liouvillian",
    "vacuum_state",
    "evolve",
    "steady_state",
    "trace_norm",
    "photon_number",
    "g2_zero",
    "g2_tau",
    "weak_drive_solution",
    "g2_tau_weak",
    "detuning_sweep",
    "convergence_audit",
    "dominant_frequency",
    "linear_cavity_photon_number",
]

log = logging.getLogger(__name__)


class NonConvergenceError(RuntimeError):
    """A time march or integrator failed to meet its tolerance."""

    def __init__(self, message: str, residual: float = math.nan, state=None):
        super().__init__(message)
        self.residual = residual
        self.state = state


class UndefinedCorrelationError(ValueError):
    """g2 requested for a state with (numerically) no photons."""


@dataclass(frozen=True)
class SimControl:
    """Solver settings.  ``t_max`` is in units of 1/kappa."""

    omega_ratio: float = 0.05
    rtol: float = 1e-8
    t_max: float = 30.0
    eps_ss: float = 1e-9
    allow_strong_drive: bool = False
    integrator: str = "expm"
    check_states: bool = True

    def __post_init__(self):
        if self.omega_ratio < 0:
            raise ValueError("omega_ratio must be >= 0")
        if self.omega_ratio > 0.2 and not self.allow_strong_drive:
            raise ValueError("Omega/kappa > 0.2 leaves the weak-drive regime; "
                             "set allow_strong_drive=True to override")
        if self.integrator not in ("expm", "ode"):
            raise ValueError("integrator must be 'expm' or 'ode'")
        if not self.t_max > 0 or not self.rtol > 0 or not self.eps_ss > 0:
            raise ValueError("t_max, rtol and eps_ss must be positive")


@dataclass
class Liouvillian:
    dims: HilbertDims
    mat: sp.csr_matrix
    H: QOperator
    jumps: list = field(default_factory=list)
    params: ModelParams | None = None

    def apply(self, rho) -> np.ndarray:
        m = rho.mat if isinstance(rho, DensityMatrix) else np.asarray(rho)
        d = self.dims.dim
        return (self.mat @ m.reshape(d * d)).reshape(d, d)

    @property
    def kappa(self) -> float:
        return self.params.kappa if self.params is not None else math.nan


@dataclass
class CorrelationSeries:
    """g2(tau) on ``tau`` (units of 1/omega_m)."""

    tau: np.ndarray
    values: np.ndarray
    params: ModelParams | None = None
    dims: HilbertDims | None = None
    ctrl: SimControl | None = None
    engine: str = "master_equation"

    @property
    def g2_0(self) -> float:
        return float(self.values[0])

    @property
    def long_time_limit(self) -> float:
        """Mean over the last quarter of the grid."""
        n = max(1, len(self.values) // 4)
        return float(np.mean(self.values[-n:]))


@dataclass(frozen=True)
class SweepRow:
    delta_L: float
    g2_zero: float
    n_photon: float
    converged: bool
    message: str = ""


@dataclass
class AuditReport:
    base: float
    photon_doubled: float
    phonon_doubled: float
    drive_halved: float
    tol: float = 1e-3
    engine: str = "weak_drive"

    @property
    def deltas(self) -> dict:
        def rel(x):
            return abs(x - self.base) / abs(self.base) if self.base else abs(x)
        return {
            "photon_cutoff": rel(self.photon_doubled),
            "phonon_cutoff": rel(self.phonon_doubled),
            "drive": rel(self.drive_halved),
        }

    @property
    def passed(self) -> bool:
        return all(np.isfinite(v) and v < self.tol for v in self.deltas.values())


def trace_norm(m: np.ndarray) -> float:
    return float(np.linalg.svd(m, compute_uv=False).sum())


def _lindblad_terms(L: sp.csr_matrix, ident: sp.csr_matrix) -> sp.csr_matrix:
    LdL = L.conj().T @ L
    return sp.kron(L, L.conj()) - 0.5 * sp.kron(LdL, ident) - 0.5 * sp.kron(ident, LdL.T)


def build_liouvillian(H: QOperator, jumps, params: ModelParams | None = None) -> Liouvillian:
    """Lindblad generator for ``H`` and ``jumps = [(rate, op), ...]``."""
    dims = H.dims
    ident = sp.identity(dims.dim, dtype=complex, format="csr")
    Lmat = -1j * (sp.kron(H.mat, ident) - sp.kron(ident, H.mat.T))
    clean = []
    for rate, op in jumps:
        if op.dims != dims:
            raise ValueError(f"jump operator dims {op.dims} do not match H dims {dims}")
        if rate < 0:
            raise ValueError("jump rates must be non-negative")
        if rate == 0:
            continue
        Lmat = Lmat + rate * _lindblad_terms(op.mat, ident)
        clean.append((float(rate), op))
    Lmat = sp.csr_matrix(Lmat)
    Lmat.eliminate_zeros()
    return Liouvillian(dims=dims, mat=Lmat, H=H, jumps=clean, params=params)


def model_jumps(p: ModelParams, dims: HilbertDims) -> list:
    a = ladder(dims, "photon")
    b = ladder(dims, "phonon")
    jumps = [(p.kappa, a)]
    if p.gamma_m > 0:
        jumps.append((p.gamma_m * (p.n_th + 1), b))
        if p.n_th > 0:
            jumps.append((p.gamma_m * p.n_th, b.dag()))
    return jumps


def model_liouvillian(p: ModelParams, dims: HilbertDims) -> Liouvillian:
    return build_liouvillian(build_hamiltonian(p, dims), model_jumps(p, dims), params=p)


def vacuum_state(dims: HilbertDims) -> DensityMatrix:
    return DensityMatrix.from_ket(dims, basis_state(dims, 0, 0))


def _time_scale(L: Liouvillian) -> float:
    """Unit converting ``t`` arguments to absolute time (1/kappa)."""
    k = L.kappa
    if not (k > 0):
        raise ValueError("time arguments are in units of 1/kappa and need kappa > 0")
    return 1.0 / k


def _propagate(L: Liouvillian, vec: np.ndarray, t: float, ctrl: SimControl) -> np.ndarray:
    if t == 0:
        return vec.copy()
    if ctrl.integrator == "expm":
        return spla.expm_multiply(L.mat * t, vec)
    # adaptive implicit integrator, kept as an independent route
    sol = solve_ivp(lambda _t, y: L.mat @ y, (0.0, t), vec.astype(complex),
                    method="BDF", rtol=ctrl.rtol, atol=ctrl.rtol * 1e-3,
                    jac=L.mat, t_eval=[t])
    if not sol.success:
        raise NonConvergenceError(f"BDF integration failed: {sol.message}")
    return sol.y[:, -1]


def _check(rho: DensityMatrix, ctrl: SimControl) -> DensityMatrix:
    if ctrl.check_states:
        rho.check(trace_tol=1e-8, herm_tol=1e-10, pos_tol=1e-8)
    return rho


def evolve(rho0: DensityMatrix, L: Liouvillian, t: float, ctrl: SimControl = SimControl()) -> DensityMatrix:
    """rho(t) for ``t`` in units of 1/kappa."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if rho0.dims != L.dims:
        raise ValueError("rho0 and Liouvillian dims differ")
    if t == 0:
        return DensityMatrix(rho0.dims, rho0.mat.copy())
    d = L.dims.dim
    out = _propagate(L, rho0.mat.reshape(d * d), t * _time_scale(L), ctrl).reshape(d, d)
    # remove the antihermitian rounding residue only
    out = 0.5 * (out + out.conj().T)
    return _check(DensityMatrix(L.dims, out), ctrl)


def _residual(L: Liouvillian, rho: DensityMatrix) -> float:
    return trace_norm(L.apply(rho))


def _steady_time_march(L: Liouvillian, ctrl: SimControl) -> DensityMatrix:
    scale = _time_scale(L)
    d = L.dims.dim
    vec = vacuum_state(L.dims).mat.reshape(d * d)
    n_chunks = max(1, int(math.ceil(ctrl.t_max)))
    dt = ctrl.t_max / n_chunks
    res = math.inf
    rho = None
    for _ in range(n_chunks):
        vec = _propagate(L, vec, dt * scale, ctrl)
        m = vec.reshape(d, d)
        rho = DensityMatrix(L.dims, 0.5 * (m + m.conj().T))
        res = _residual(L, rho)
        if res < ctrl.eps_ss:
            return _check(rho, ctrl)
    raise NonConvergenceError(
        f"time march did not reach ||L(rho)||_1 < {ctrl.eps_ss:g} by t = {ctrl.t_max:g}/kappa "
        f"(residual {res:.3e})", residual=res, state=rho)


def _steady_null_space(L: Liouvillian, ctrl: SimControl, gap_tol: float) -> DensityMatrix:
    d = L.dims.dim
    M = L.mat.tolil(copy=True)
    trace_row = np.zeros(d * d, dtype=complex)
    trace_row[np.arange(d) * (d + 1)] = 1.0
    M[0, :] = trace_row
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    vec = spla.splu(sp.csc_matrix(M)).solve(rhs)

    # second-smallest eigenvalue of L decides (quasi-)degeneracy of the kernel
    scale = float(np.abs(L.mat.data).max())
    try:
        vals = spla.eigs(L.mat.tocsc(), k=2, sigma=-1e-7 * scale, which="LM",
                         return_eigenvectors=False)
        gap = float(np.sort(np.abs(vals))[-1])
    except (spla.ArpackNoConvergence, RuntimeError) as exc:  # pragma: no cover
        log.warning("kernel gap estimate failed: %s", exc)
        gap = math.nan
    if gap < gap_tol * scale:
        raise NonConvergenceError(
            f"Liouvillian kernel is degenerate (second eigenvalue {gap:.3e}); "
            "fall back to method='time_march'", residual=gap)

    m = vec.reshape(d, d)
    rho = DensityMatrix(L.dims, 0.5 * (m + m.conj().T))
    res = _residual(L, rho)
    if res > max(ctrl.eps_ss, 1e-10 * scale):
        raise NonConvergenceError(f"null-space solve residual {res:.3e}", residual=res, state=rho)
    return _check(rho, ctrl)


def steady_state(L: Liouvillian, ctrl: SimControl = SimControl(), method: str = "time_march",
                 gap_tol: float = 1e-12) -> DensityMatrix:
    """Stationary state of ``L``.

    ``time_march`` evolves the joint vacuum until ``||L(rho)||_1 < eps_ss``
    (checked every 1/kappa) and raises :class:`NonConvergenceError` with
    the residual when ``t_max`` is reached first.  ``null_space`` solves
    for the trace-one kernel vector and raises when the kernel is
    degenerate.
    """
    if not L.kappa > 0:
        raise ValueError("steady_state needs kappa > 0")
    if method == "time_march":
        rho = _steady_time_march(L, ctrl)
    elif method == "null_space":
        rho = _steady_null_space(L, ctrl, gap_tol)
    else:
        raise ValueError("method must be 'time_march' or 'null_space'")
    top = _phonon_edge_population(rho)
    if top > 1e-6:
        warnings.warn(f"phonon cutoff level holds population {top:.2e}; "
                      "the truncation is not converged", RuntimeWarning, stacklevel=2)
    return rho


def _phonon_edge_population(rho: DensityMatrix) -> float:
    dims = rho.dims
    diag = np.real(np.diag(rho.mat)).reshape(dims.photon, dims.phonon)
    return float(diag[:, -1].sum())


def _photon_ops(dims: HilbertDims):
    a = ladder(dims, "photon").mat
    ad = a.conj().T
    return a, ad, ad @ a, ad @ ad @ a @ a


def photon_number(rho: DensityMatrix) -> float:
    _, _, n, _ = _photon_ops(rho.dims)
    return float(np.real(np.sum((n.T.multiply(rho.mat)).data)))


def g2_zero(rho: DensityMatrix, floor: float = 1e-14) -> float:
    """<a'a'aa> / <a'a>^2; raises when <a'a> is numerically zero."""
    _, _, n, n2 = _photon_ops(rho.dims)
    nn = float(np.real(np.trace(n @ rho.mat)))
    if nn <= floor:
        raise UndefinedCorrelationError(f"photon number {nn:.3e} too small for g2")
    return float(np.real(np.trace(n2 @ rho.mat))) / nn**2


def g2_tau(rho_ss: DensityMatrix, L: Liouvillian, tau_grid, ctrl: SimControl = SimControl()) -> CorrelationSeries:
    """Quantum-regression g2(tau) = Tr[a'a e^{L tau}(a rho a')] / <a'a>^2.

    ``tau_grid`` is in units of 1/omega_m and must be uniformly spaced
    from zero.
    """
    if L.params is None:
        raise ValueError("g2_tau needs a Liouvillian built from ModelParams")
    tau = np.asarray(tau_grid, dtype=float)
    _uniform_from_zero(tau)
    a, ad, n, _ = _photon_ops(rho_ss.dims)
    nn = float(np.real(np.trace(n @ rho_ss.mat)))
    if nn <= 1e-14:
        raise UndefinedCorrelationError("photon number too small for g2")
    d = rho_ss.dims.dim
    sigma = (a @ rho_ss.mat @ ad).reshape(d * d)
    t_abs = tau / L.params.omega_m
    if len(tau) == 1:
        states = sigma[None, :]
    elif ctrl.integrator == "expm":
        states = spla.expm_multiply(L.mat, sigma, start=0.0, stop=t_abs[-1],
                                    num=len(tau), endpoint=True)
    else:
        sol = solve_ivp(lambda _t, y: L.mat @ y, (0.0, t_abs[-1]), sigma, method="BDF",
                        rtol=ctrl.rtol, atol=ctrl.rtol * 1e-3 * nn, jac=L.mat, t_eval=t_abs)
        if not sol.success:
            raise NonConvergenceError(f"BDF integration failed: {sol.message}")
        states = sol.y.T
    # Tr[n X] = sum_ij n_ij X_ji
    nvec = np.asarray(n.T.todense()).reshape(d * d)
    vals = np.real(states @ nvec) / nn**2
    return CorrelationSeries(tau=tau, values=vals, params=L.params, dims=rho_ss.dims,
                             ctrl=ctrl, engine="master_equation")


def _uniform_from_zero(tau: np.ndarray):
    if tau.ndim != 1 or tau.size == 0 or tau[0] != 0:
        raise ValueError("tau grid must be 1D and start at 0")
    if tau.size > 1:
        step = np.diff(tau)
        if np.any(step <= 0) or np.ptp(step) > 1e-9 * step.mean():
            raise ValueError("tau grid must be uniformly spaced and increasing")


# ---------------------------------------------------------------- weak drive


@dataclass
class WeakDriveSolution:
    """Leading-order amplitudes of the no-jump state grown from |0,0>.

    ``c1[n2]`` multiplies ``|1, n2>`` (order Omega) and ``c2[n2]``
    multiplies ``|2, n2>`` (order Omega^2).
    """

    params: ModelParams
    dims: HilbertDims
    c1: np.ndarray
    c2: np.ndarray

    @property
    def n_photon(self) -> float:
        return float(np.vdot(self.c1, self.c1).real)

    @property
    def g2_zero(self) -> float:
        n1 = self.n_photon
        if n1 <= 0:
            raise UndefinedCorrelationError("no one-photon amplitude (Omega = 0?)")
        return 2 * float(np.vdot(self.c2, self.c2).real) / n1**2

    @property
    def phonon_population_after_click(self) -> np.ndarray:
        """Phonon distribution of the state conditioned on one photodetection."""
        p = np.abs(self.c1) ** 2
        return p / p.sum()

    def ket(self) -> np.ndarray:
        m = self.dims.phonon
        psi = np.zeros(self.dims.dim, dtype=complex)
        psi[0] = 1.0
        psi[m:2 * m] = self.c1
        if self.dims.n_photon_max >= 2:
            psi[2 * m:3 * m] = self.c2
        return psi


def _no_jump_blocks(p: ModelParams, dims: HilbertDims):
    """Photon-number blocks of H_eff = H(Omega=0) - (i/2) sum_j L_j' L_j."""
    if p.n_th > 0:
        raise ValueError("the weak-drive engine needs a zero-temperature reference state")
    m = dims.phonon
    b = sp.diags(np.sqrt(np.arange(1, m)), 1, shape=(m, m), dtype=complex)
    nb = b.conj().T @ b
    x = b + b.conj().T
    blocks = []
    for k in range(min(dims.photon, 3)):
        K = (-p.delta_L * k - 0.5j * p.kappa * k) * sp.identity(m) + p.omega_m * nb + p.g * k * x
        if p.g2:
            K = K + p.g2 * k * (x @ x)
        if p.gamma_m:
            K = K - 0.5j * p.gamma_m * nb
        blocks.append(sp.csc_matrix(K))
    return blocks


def weak_drive_solution(p: ModelParams, dims: HilbertDims = HilbertDims()) -> WeakDriveSolution:
    """Leading-order weak-drive amplitudes.

    ``K_1 c1 = -Omega |0>`` and ``K_2 c2 = -sqrt(2) Omega c1`` where
    ``K_k`` is the k-photon block of the no-jump generator.  Normalised
    correlations built from ``c1``, ``c2`` do not depend on ``Omega``.
    """
    if not p.kappa > 0:
        raise ValueError("the weak-drive engine needs kappa > 0")
    if dims.n_photon_max < 2:
        raise ValueError("g2 needs at least two photons in the truncation")
    if p.Omega <= 0:
        raise ValueError("the weak-drive engine needs Omega > 0")
    _, K1, K2 = _no_jump_blocks(p, dims)
    e0 = np.zeros(dims.phonon, dtype=complex)
    e0[0] = 1.0
    c1 = spla.spsolve(K1, -p.Omega * e0)
    c2 = spla.spsolve(K2, -math.sqrt(2) * p.Omega * c1)
    return WeakDriveSolution(params=p, dims=dims, c1=np.asarray(c1), c2=np.asarray(c2))


def g2_tau_weak(p: ModelParams, dims: HilbertDims, tau_grid) -> CorrelationSeries:
    """Leading-order g2(tau) from the post-detection state.

    After a click the state is ``c1`` in the zero-photon sector plus
    ``sqrt(2) c2`` in the one-photon sector; its one-photon norm,
    propagated under the block-triangular no-jump generator, gives
    ``<a'a>(tau) / <a'a>^2``.  ``tau_grid`` is in units of 1/omega_m.
    """
    tau = np.asarray(tau_grid, dtype=float)
    _uniform_from_zero(tau)
    sol = weak_drive_solution(p, dims)
    K0, K1, _ = _no_jump_blocks(p, dims)
    m = dims.phonon
    gen = sp.bmat([[-1j * K0, None],
                   [-1j * p.Omega * sp.identity(m, dtype=complex, format="csc"), -1j * K1]],
                  format="csc")
    chi0 = np.concatenate([sol.c1, math.sqrt(2) * sol.c2])
    t_abs = tau / p.omega_m
    if len(tau) == 1:
        states = chi0[None, :]
    else:
        states = spla.expm_multiply(gen, chi0, start=0.0, stop=t_abs[-1], num=len(tau), endpoint=True)
    one = states[:, m:]
    vals = np.sum(np.abs(one) ** 2, axis=1) / sol.n_photon**2
    return CorrelationSeries(tau=tau, values=vals, params=p, dims=dims, engine="weak_drive")


# ---------------------------------------------------------------- sweeps


def _g2_point(p: ModelParams, dims: HilbertDims, ctrl: SimControl, engine: str, method: str):
    if engine == "weak_drive":
        sol = weak_drive_solution(p, dims)
        return sol.g2_zero, sol.n_photon
    if engine == "master_equation":
        rho = steady_state(model_liouvillian(p, dims), ctrl, method=method)
        return g2_zero(rho), photon_number(rho)
    raise ValueError("engine must be 'weak_drive' or 'master_equation'")


def detuning_sweep(base: ModelParams, delta_grid, dims: HilbertDims = HilbertDims(),
                   ctrl: SimControl = SimControl(), engine: str = "weak_drive",
                   method: str = "time_march") -> list[SweepRow]:
    """g2(0) and <a'a> over laser detunings; failing points are flagged."""
    rows = []
    for dl in np.asarray(delta_grid, dtype=float):
        p = base.replace(delta_L=float(dl))
        try:
            g2, nn = _g2_point(p, dims, ctrl, engine, method)
            rows.append(SweepRow(float(dl), g2, nn, True))
        except (NonConvergenceError, UndefinedCorrelationError, ValueError,
                np.linalg.LinAlgError, RuntimeError) as exc:
            rows.append(SweepRow(float(dl), math.nan, math.nan, False, str(exc)))
    return rows


def convergence_audit(params: ModelParams, dims: HilbertDims = HilbertDims(),
                      ctrl: SimControl = SimControl(), engine: str = "weak_drive",
                      method: str = "time_march", tol: float = 1e-3) -> AuditReport:
    """Relative change of g2(0) under doubled cutoffs and halved drive."""

    def value(p, d):
        try:
            return _g2_point(p, d, ctrl, engine, method)[0]
        except (NonConvergenceError, UndefinedCorrelationError, ValueError) as exc:
            log.error("audit point failed: %s", exc)
            return math.nan

    rep = AuditReport(
        base=value(params, dims),
        photon_doubled=value(params, HilbertDims(2 * dims.n_photon_max, dims.n_phonon_max)),
        phonon_doubled=value(params, HilbertDims(dims.n_photon_max, 2 * dims.n_phonon_max)),
        drive_halved=value(params.replace(Omega=params.Omega / 2), dims),
        tol=tol,
        engine=engine,
    )
    if not rep.passed:
        log.error("convergence audit FAILED for %s: %s", params, rep.deltas)
        warnings.warn(f"convergence audit failed: {rep.deltas}", RuntimeWarning, stacklevel=2)
    return rep


def dominant_frequency(series: CorrelationSeries, t_window=(5.0, 30.0), pad: int = 16) -> float:
    """Angular frequency (units of omega_m) of the strongest oscillation
    of g2(tau) for tau in ``t_window`` (units of 1/kappa).

    A linear trend is removed and a Hann window applied before a
    zero-padded FFT.
    """
    p = series.params
    tau_k = series.tau * p.kappa / p.omega_m
    sel = (tau_k >= t_window[0]) & (tau_k <= t_window[1])
    if sel.sum() < 8:
        raise ValueError("too few samples inside the analysis window")
    y = detrend(series.values[sel]) * np.hanning(int(sel.sum()))
    dt = series.tau[1] - series.tau[0]
    nfft = pad * len(y)
    spec = np.abs(np.fft.rfft(y, nfft))
    freqs = 2 * np.pi * np.fft.rfftfreq(nfft, dt)
    spec[0] = 0.0
    return float(freqs[int(np.argmax(spec))])


def linear_cavity_photon_number(delta_L: float, kappa: float, Omega: float) -> float:
    """Closed-form <a'a> of the driven damped cavity, Omega^2/(delta_L^2 + kappa^2/4)."""
    return Omega**2 / (delta_L**2 + kappa**2 / 4)
