"""Physical parameters -> effective optomechanical constants.

Covers the three membrane realisations (bulk membrane, disordered atom
cloud, ordered 2D atom array) and the single-photon-regime figures of
merit built from them.  Everything is in SI units; frequencies and rates
are angular (rad/s).
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from itertools import product
from typing import Iterable, Sequence

import numpy as np
from scipy import constants as const

__all__ = [
    "ALPHA_ARRAY",
    "PhysicalConfig",
    "OptomechParams",
    "RegimeMargins",
    "RegimeRow",
    "derive_params",
    "derive_array_params",
    "derive_cloud_params",
    "derive_membrane_params",
    "regime_margins",
    "sweep_regime_map",
    "fig3_detuning_over_gamma",
    "fig3_config",
    "hem_config",
    "RB87_MASS",
]

#: Numerical prefactor of the array's disorder-scattering rate.
ALPHA_ARRAY = 21 / 5

RB87_MASS = 86.909180527 * const.atomic_mass

#: Above this Lamb-Dicke parameter the small-motion expansion is strained.
ETA_VALIDITY_LIMIT = 0.3

SCHEMES = ("membrane", "cloud", "array")
SWEEP_AXES = ("cavity_length", "waist", "lamb_dicke")


@dataclass(frozen=True)
class PhysicalConfig:
    """Real-world cavity / atom / lattice parameters.

    ``detuning_over_gamma`` is ``(delta - Delta)/gamma`` for the array and
    ``delta/gamma`` for the cloud; the cooperative shift is never separated
    from the cavity-atom detuning.  The recoil energy is given relative to
    ``gamma`` unless ``atom_mass`` is set, in which case
    ``E_R = hbar^2 q^2 / 2m`` overrides the ratio.

    ``equilibrium_phase`` is ``q z0``; the string ``"max_g"`` selects
    ``z0 = pi / 4q`` where the linear coupling is maximal and the quadratic
    one vanishes.
    """

    scheme: str = "array"
    wavelength: float = 800e-9
    finesse: float = 150_000.0
    cavity_length: float = 3.2e-2
    waist: float = 15e-6
    lattice_spacing: float | None = None
    atom_number: float | None = None
    lamb_dicke: float = 0.15
    gamma: float = 2 * math.pi * 6e6
    detuning_over_gamma: float | None = None
    recoil_over_gamma: float = 1 / 1620
    atom_mass: float | None = None
    omega_m: float | None = None
    equilibrium_phase: float | str = "max_g"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        for name in ("wavelength", "cavity_length", "waist"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.finesse >= 1:
            raise ValueError("finesse must be >= 1")
        if not self.gamma > 0:
            raise ValueError("gamma must be > 0")
        if self.scheme != "membrane" and not 0 < self.lamb_dicke < 1:
            raise ValueError("lamb_dicke must lie in (0, 1)")
        if self.scheme == "membrane" and self.lamb_dicke < 0:
            raise ValueError("lamb_dicke must be non-negative")
        if self.atom_mass is not None and not self.atom_mass > 0:
            raise ValueError("atom_mass must be > 0")
        if not self.recoil_over_gamma > 0:
            raise ValueError("recoil_over_gamma must be > 0")
        if isinstance(self.equilibrium_phase, str) and self.equilibrium_phase != "max_g":
            raise ValueError("equilibrium_phase must be 'max_g' or a float q*z0")

    @property
    def q(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def qz0(self) -> float:
        if self.equilibrium_phase == "max_g":
            return math.pi / 4
        return float(self.equilibrium_phase)

    @property
    def recoil_rate(self) -> float:
        """E_R / hbar in rad/s."""
        if self.atom_mass is not None:
            return const.hbar * self.q**2 / (2 * self.atom_mass)
        return self.recoil_over_gamma * self.gamma

    def replace(self, **changes) -> "PhysicalConfig":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class OptomechParams:
    """Effective single-mode constants, all in rad/s (``x0`` in m)."""

    g: float
    kappa_c: float
    kappa_sc: float
    kappa: float
    omega_m: float
    g2: float
    G: float
    N_eff: float
    x0: float
    scheme: str = "array"
    flags: tuple[str, ...] = field(default=())

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class RegimeMargins:
    sideband: float
    blockade: float


@dataclass(frozen=True)
class RegimeRow:
    axis1: float
    axis2: float
    sideband: float
    blockade: float
    valid: bool
    message: str = ""


def _kappa_c(cfg: PhysicalConfig) -> float:
    return const.c / cfg.cavity_length * math.pi / cfg.finesse


def _flags(cfg: PhysicalConfig) -> list[str]:
    flags = []
    if cfg.lamb_dicke > ETA_VALIDITY_LIMIT:
        flags.append("eta_above_small_motion_limit")
    return flags


def derive_array_params(cfg: PhysicalConfig) -> OptomechParams:
    """Effective constants of the ordered atom-array membrane."""
    if cfg.scheme != "array":
        raise ValueError("derive_array_params needs scheme='array'")
    a = cfg.lattice_spacing
    if a is None or not a > 0:
        raise ValueError("array scheme needs a strictly positive lattice_spacing")
    if not a < cfg.wavelength:
        raise ValueError("lattice_spacing must be subwavelength (a < wavelength)")
    det = cfg.detuning_over_gamma
    if det is None:
        raise ValueError("array scheme needs detuning_over_gamma = (delta - Delta)/gamma")
    if det == 0:
        raise ValueError("detuning_over_gamma must be nonzero (adiabatic elimination breaks down)")

    q, w, eta = cfg.q, cfg.waist, cfg.lamb_dicke
    fsr = const.c / cfg.cavity_length
    n_atoms = math.pi * w**2 / a**2
    mode_area = q**2 * w**2

    g = abs(eta * fsr / det * math.sqrt(n_atoms) * 3 / mode_area * math.sin(2 * cfg.qz0))
    g2 = math.cos(2 * cfg.qz0) * eta**2 * fsr / det * 4 / mode_area
    if abs(g2) < 1e-12 * max(g, 1.0):
        # cos(pi/2) leaves a ~1e-17 residue
        g2 = 0.0
    kappa_c = _kappa_c(cfg)
    kappa_sc = eta**2 * n_atoms * fsr / det**2 * (ALPHA_ARRAY / 2) / mode_area
    omega_m = cfg.recoil_rate / eta**2

    flags = _flags(cfg)
    return OptomechParams(
        g=g,
        kappa_c=kappa_c,
        kappa_sc=kappa_sc,
        kappa=kappa_c + kappa_sc,
        omega_m=omega_m,
        g2=g2,
        G=g**2 / omega_m,
        N_eff=n_atoms,
        x0=eta / q,
        scheme="array",
        flags=tuple(flags),
    )


def derive_cloud_params(cfg: PhysicalConfig) -> OptomechParams:
    """Effective constants for a disordered cloud of ``atom_number`` atoms."""
    if cfg.scheme != "cloud":
        raise ValueError("derive_cloud_params needs scheme='cloud'")
    if cfg.atom_number is None or not cfg.atom_number > 0:
        raise ValueError("cloud scheme needs a positive atom_number")
    det = cfg.detuning_over_gamma
    if det is None or det == 0:
        raise ValueError("cloud scheme needs a nonzero detuning_over_gamma = delta/gamma")

    q, w, eta, n_atoms = cfg.q, cfg.waist, cfg.lamb_dicke, cfg.atom_number
    fsr = const.c / cfg.cavity_length
    mode_area = q**2 * w**2

    g = abs(eta * fsr / det * math.sqrt(n_atoms) * 3 / mode_area)
    kappa_c = _kappa_c(cfg)
    kappa_sc = n_atoms * fsr / det**2 * 1.5 / mode_area
    omega_m = cfg.recoil_rate / eta**2
    return OptomechParams(
        g=g,
        kappa_c=kappa_c,
        kappa_sc=kappa_sc,
        kappa=kappa_c + kappa_sc,
        omega_m=omega_m,
        g2=0.0,
        G=g**2 / omega_m,
        N_eff=float(n_atoms),
        x0=eta / q,
        scheme="cloud",
        flags=tuple(_flags(cfg)),
    )


def derive_membrane_params(cfg: PhysicalConfig) -> OptomechParams:
    """Order-of-magnitude mapping for a clamped bulk membrane.

    Only ``g ~ eta c / l`` is known, so the output carries the
    ``order_of_magnitude_g`` flag.  The mechanical frequency is not
    recoil-derived and must be given as ``cfg.omega_m``.
    """
    if cfg.scheme != "membrane":
        raise ValueError("derive_membrane_params needs scheme='membrane'")
    if cfg.omega_m is None or not cfg.omega_m > 0:
        raise ValueError("membrane scheme needs a caller-supplied omega_m > 0")
    g = cfg.lamb_dicke * const.c / cfg.cavity_length
    kappa_c = _kappa_c(cfg)
    return OptomechParams(
        g=g,
        kappa_c=kappa_c,
        kappa_sc=0.0,
        kappa=kappa_c,
        omega_m=cfg.omega_m,
        g2=0.0,
        G=g**2 / cfg.omega_m,
        N_eff=0.0,
        x0=cfg.lamb_dicke / cfg.q,
        scheme="membrane",
        flags=("order_of_magnitude_g",),
    )


def derive_params(cfg: PhysicalConfig) -> OptomechParams:
    return {
        "array": derive_array_params,
        "cloud": derive_cloud_params,
        "membrane": derive_membrane_params,
    }[cfg.scheme](cfg)


def regime_margins(p: OptomechParams) -> RegimeMargins:
    """log10 margins of the sideband (omega_m > kappa) and blockade
    (g^2/omega_m >> kappa) conditions; both positive inside the
    single-photon regime.  ``g = 0`` gives ``blockade = -inf``.
    """
    if not p.kappa > 0:
        raise ValueError("regime margins need kappa > 0")
    if not p.omega_m > 0:
        raise ValueError("regime margins need omega_m > 0")
    sideband = math.log10(p.omega_m / p.kappa)
    ratio = p.g**2 / (p.kappa * p.omega_m)
    blockade = math.log10(ratio) if ratio > 0 else -math.inf
    return RegimeMargins(sideband=sideband, blockade=blockade)


def _check_monotone(name: str, grid: Sequence[float]) -> np.ndarray:
    arr = np.asarray(grid, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"grid for {name!r} must be a non-empty 1D sequence")
    if arr.size > 1:
        d = np.diff(arr)
        if not (np.all(d > 0) or np.all(d < 0)):
            raise ValueError(f"grid for {name!r} must be strictly monotone")
    return arr


def sweep_regime_map(
    cfg_template: PhysicalConfig,
    axis1: tuple[str, Iterable[float]],
    axis2: tuple[str, Iterable[float]],
) -> list[RegimeRow]:
    """Exhaustive 2D grid of regime margins for the array scheme.

    Rows come out row-major (axis1 outer).  A point whose derivation
    fails is kept as an invalid row with NaN margins.
    """
    (name1, grid1), (name2, grid2) = axis1, axis2
    for name in (name1, name2):
        if name not in SWEEP_AXES:
            raise ValueError(f"axis name must be one of {SWEEP_AXES}, got {name!r}")
    if name1 == name2:
        raise ValueError("the two sweep axes must differ")
    g1 = _check_monotone(name1, list(grid1))
    g2 = _check_monotone(name2, list(grid2))

    rows = []
    for v1, v2 in product(g1, g2):
        try:
            cfg = cfg_template.replace(**{name1: float(v1), name2: float(v2)})
            m = regime_margins(derive_array_params(cfg))
            rows.append(RegimeRow(float(v1), float(v2), m.sideband, m.blockade, True))
        except (ValueError, ZeroDivisionError) as exc:
            rows.append(RegimeRow(float(v1), float(v2), math.nan, math.nan, False, str(exc)))
    return rows


def fig3_detuning_over_gamma(a_over_lambda: float) -> float:
    """(delta - Delta)/gamma = (150 / 4 pi) (lambda / a)^2."""
    return 150 / (4 * math.pi) / a_over_lambda**2


def fig3_config(**overrides) -> PhysicalConfig:
    """The realistic array configuration used for the regime maps and the
    g2 figures (eta = 0.15, w = 15 um, l = 3.2 cm)."""
    wavelength = overrides.pop("wavelength", 800e-9)
    a_over_lambda = overrides.pop("a_over_lambda", 0.6)
    base = dict(
        scheme="array",
        wavelength=wavelength,
        finesse=150_000.0,
        cavity_length=3.2e-2,
        waist=15e-6,
        lattice_spacing=a_over_lambda * wavelength,
        lamb_dicke=0.15,
        gamma=2 * math.pi * 6e6,
        detuning_over_gamma=fig3_detuning_over_gamma(a_over_lambda),
        recoil_over_gamma=1 / 1620,
    )
    base.update(overrides)
    return PhysicalConfig(**base)


def hem_config(**overrides) -> PhysicalConfig:
    """Existing-cavity example: F = 340000, w = 30 um, l = 5 cm, 532 nm
    lattice for 780 nm Rb atoms, eta = 0.2, recoil from the Rb mass."""
    wavelength = 780e-9
    a_over_lambda = 532 / 780
    base = dict(
        scheme="array",
        wavelength=wavelength,
        finesse=340_000.0,
        cavity_length=5e-2,
        waist=30e-6,
        lattice_spacing=a_over_lambda * wavelength,
        lamb_dicke=0.2,
        gamma=2 * math.pi * 6.07e6,
        detuning_over_gamma=fig3_detuning_over_gamma(a_over_lambda),
        atom_mass=RB87_MASS,
    )
    base.update(overrides)
    return PhysicalConfig(**base)
