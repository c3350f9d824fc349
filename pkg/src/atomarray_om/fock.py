"""Truncated photon (x) phonon Fock space.

Basis ordering is photon-major: ``|n1, n2>`` sits at index
``n1 * (n_phonon_max + 1) + n2``.  Operators are kept as CSR matrices;
density matrices are dense (the weak-drive problems here are small).
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

__all__ = [
    "HilbertDims",
    "ModelParams",
    "QOperator",
    "DensityMatrix",
    "ladder",
    "number",
    "identity",
    "build_hamiltonian",
    "spectrum_undriven",
    "polaron_level",
    "expectation",
    "basis_state",
    "fock_density",
    "fig4_model",
]


@dataclass(frozen=True)
class HilbertDims:
    n_photon_max: int = 4
    n_phonon_max: int = 12

    def __post_init__(self):
        if self.n_photon_max < 1 or self.n_phonon_max < 1:
            raise ValueError("both cutoffs must be >= 1")

    @property
    def photon(self) -> int:
        return self.n_photon_max + 1

    @property
    def phonon(self) -> int:
        return self.n_phonon_max + 1

    @property
    def dim(self) -> int:
        return self.photon * self.phonon

    def index(self, n1: int, n2: int) -> int:
        if not (0 <= n1 <= self.n_photon_max and 0 <= n2 <= self.n_phonon_max):
            raise IndexError(f"|{n1},{n2}> outside the truncated space {self}")
        return n1 * self.phonon + n2

    def scaled(self, factor: int) -> "HilbertDims":
        return HilbertDims(self.n_photon_max * factor, self.n_phonon_max * factor)


@dataclass(frozen=True)
class ModelParams:
    """Rotating-frame model constants (rad/s, or any consistent unit).

    ``delta_L = omega_L - omega_c``.  ``gamma_m`` / ``n_th`` describe an
    optional phonon bath; both default to zero (no mechanical damping).
    """

    delta_L: float
    omega_m: float
    g: float
    kappa: float
    Omega: float = 0.0
    g2: float = 0.0
    gamma_m: float = 0.0
    n_th: float = 0.0

    def __post_init__(self):
        if not self.omega_m > 0:
            raise ValueError("omega_m must be > 0")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.Omega < 0:
            raise ValueError("Omega must be >= 0 (real drive phase convention)")
        if self.gamma_m < 0 or self.n_th < 0:
            raise ValueError("gamma_m and n_th must be >= 0")

    @property
    def G(self) -> float:
        return self.g**2 / self.omega_m

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_optomech(cls, p, delta_L: float, Omega: float = 0.0, **extra) -> "ModelParams":
        """Build from an :class:`~atomarray_om.params.OptomechParams`."""
        return cls(delta_L=delta_L, omega_m=p.omega_m, g=p.g, kappa=p.kappa,
                   Omega=Omega, g2=p.g2, **extra)


def fig4_model(delta_L: float | None = None, omega_ratio: float = 0.05,
               g_over_wm: float = 0.49, kappa_over_wm: float = 0.275) -> ModelParams:
    """Blockade parameter set in units of omega_m (omega_m = 1).

    ``delta_L`` defaults to ``-g^2/omega_m``; the drive is
    ``Omega = omega_ratio * kappa``.
    """
    G = g_over_wm**2
    return ModelParams(
        delta_L=-G if delta_L is None else delta_L,
        omega_m=1.0,
        g=g_over_wm,
        kappa=kappa_over_wm,
        Omega=omega_ratio * kappa_over_wm,
    )


class QOperator:
    """Sparse operator on the truncated product space."""

    __slots__ = ("dims", "mat")

    def __init__(self, dims: HilbertDims, mat):
        mat = sp.csr_matrix(mat, dtype=complex)
        if mat.shape != (dims.dim, dims.dim):
            raise ValueError(f"matrix shape {mat.shape} does not match dims {dims}")
        self.dims = dims
        self.mat = mat

    def dag(self) -> "QOperator":
        return QOperator(self.dims, self.mat.conj().T)

    def _check(self, other: "QOperator"):
        if other.dims != self.dims:
            raise ValueError(f"dims mismatch: {self.dims} vs {other.dims}")

    def __matmul__(self, other):
        if isinstance(other, QOperator):
            self._check(other)
            return QOperator(self.dims, self.mat @ other.mat)
        return self.mat @ other

    def __add__(self, other: "QOperator") -> "QOperator":
        self._check(other)
        return QOperator(self.dims, self.mat + other.mat)

    def __sub__(self, other: "QOperator") -> "QOperator":
        self._check(other)
        return QOperator(self.dims, self.mat - other.mat)

    def __mul__(self, scalar) -> "QOperator":
        return QOperator(self.dims, self.mat * scalar)

    __rmul__ = __mul__

    def toarray(self) -> np.ndarray:
        return self.mat.toarray()

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        diff = self.mat - self.mat.conj().T
        if diff.nnz == 0:
            return True
        scale = max(np.abs(self.mat.data).max(initial=0.0), 1.0)
        return bool(np.abs(diff.data).max() <= tol * scale)

    def __repr__(self):
        return f"QOperator(dims={self.dims}, nnz={self.mat.nnz})"


@dataclass
class DensityMatrix:
    dims: HilbertDims
    mat: np.ndarray

    def __post_init__(self):
        self.mat = np.asarray(self.mat, dtype=complex)
        if self.mat.shape != (self.dims.dim, self.dims.dim):
            raise ValueError(f"density matrix shape {self.mat.shape} does not match {self.dims}")

    @classmethod
    def from_ket(cls, dims: HilbertDims, psi: np.ndarray) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(dims, np.outer(psi, psi.conj()))

    def trace(self) -> complex:
        return np.trace(self.mat)

    def hermiticity_error(self) -> float:
        return float(np.abs(self.mat - self.mat.conj().T).max())

    def min_eigenvalue(self) -> float:
        h = 0.5 * (self.mat + self.mat.conj().T)
        return float(np.linalg.eigvalsh(h)[0])

    def check(self, trace_tol: float = 1e-8, herm_tol: float = 1e-10, pos_tol: float = 1e-8):
        """Raise ``ValueError`` unless trace, hermiticity and positivity hold."""
        tr = self.trace()
        if abs(tr - 1) > trace_tol:
            raise ValueError(f"trace {tr} deviates from 1 by more than {trace_tol}")
        if self.hermiticity_error() > herm_tol:
            raise ValueError(f"hermiticity error {self.hermiticity_error():.3e} > {herm_tol}")
        lam = self.min_eigenvalue()
        if lam < -pos_tol:
            raise ValueError(f"negative eigenvalue {lam:.3e}")
        return self


@lru_cache(maxsize=64)
def _ladder_mat(dims: HilbertDims, which: str) -> sp.csr_matrix:
    def lower(n):
        return sp.diags(np.sqrt(np.arange(1, n)), 1, shape=(n, n))

    if which == "photon":
        m = sp.kron(lower(dims.photon), sp.identity(dims.phonon))
    elif which == "phonon":
        m = sp.kron(sp.identity(dims.photon), lower(dims.phonon))
    else:
        raise ValueError("which must be 'photon' or 'phonon'")
    m = sp.csr_matrix(m, dtype=complex)
    m.eliminate_zeros()
    return m


def ladder(dims: HilbertDims, which: str) -> QOperator:
    """Lowering operator of the photon or phonon factor, <n-1|a|n> = sqrt(n)."""
    return QOperator(dims, _ladder_mat(dims, which).copy())


def number(dims: HilbertDims, which: str) -> QOperator:
    a = ladder(dims, which)
    return a.dag() @ a


def identity(dims: HilbertDims) -> QOperator:
    return QOperator(dims, sp.identity(dims.dim, dtype=complex, format="csr"))


def build_hamiltonian(p: ModelParams, dims: HilbertDims) -> QOperator:
    """H/hbar in the frame rotating at the laser frequency:

    -delta_L a'a + omega_m b'b + g a'a (b + b') + g2 (b + b')^2 a'a + Omega (a' + a)
    """
    a = _ladder_mat(dims, "photon")
    b = _ladder_mat(dims, "phonon")
    n = a.conj().T @ a
    x = b + b.conj().T
    H = -p.delta_L * n + p.omega_m * (b.conj().T @ b) + p.g * (n @ x)
    if p.g2:
        H = H + p.g2 * (x @ x @ n)
    if p.Omega:
        H = H + p.Omega * (a + a.conj().T)
    op = QOperator(dims, H)
    op.mat.eliminate_zeros()
    return op


def polaron_level(p: ModelParams, n1: int, n2: int) -> float:
    """Undriven level (-delta_L - G n1) n1 + omega_m n2 of the untruncated model."""
    return (-p.delta_L - p.G * n1) * n1 + p.omega_m * n2


def spectrum_undriven(p: ModelParams, dims: HilbertDims, count: int | None = None) -> np.ndarray:
    """Lowest ``count`` eigenvalues of the undriven Hamiltonian (ascending)."""
    if p.Omega != 0 or p.g2 != 0:
        raise ValueError("spectrum_undriven needs Omega = 0 and g2 = 0")
    count = dims.dim if count is None else count
    if not 1 <= count <= dims.dim:
        raise ValueError(f"count must be in [1, {dims.dim}]")
    H = build_hamiltonian(p, dims).toarray()
    # photon number is conserved, so diagonalise block by block
    m = dims.phonon
    evals = np.concatenate([
        np.linalg.eigvalsh(H[k * m:(k + 1) * m, k * m:(k + 1) * m]) for k in range(dims.photon)
    ])
    return np.sort(evals)[:count]


def expectation(op: QOperator, rho: DensityMatrix) -> complex:
    """Tr[op rho]."""
    if op.dims != rho.dims:
        raise ValueError(f"dims mismatch: {op.dims} vs {rho.dims}")
    # Tr[A rho] = sum_ij A_ij rho_ji
    A = op.mat.tocoo()
    return complex(np.sum(A.data * rho.mat[A.col, A.row]))


def basis_state(dims: HilbertDims, n1: int, n2: int) -> np.ndarray:
    psi = np.zeros(dims.dim, dtype=complex)
    psi[dims.index(n1, n2)] = 1.0
    return psi


def fock_density(dims: HilbertDims, n1: int, n2: int = 0) -> DensityMatrix:
    return DensityMatrix.from_ket(dims, basis_state(dims, n1, n2))
