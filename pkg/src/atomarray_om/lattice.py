"""Collective dipole physics of a square atomic array.

Conventions
-----------
Every kernel here is the free-space dyadic Green function scaled by
``3 pi / q``, so that it is measured in units of the single-atom decay
rate ``gamma``::

    D(r) = (3 pi / q) G(r),   Im p.D(0).p = 1/2

A collective mode with in-plane wavevector ``k`` then has

    shift / gamma = -Re sum_{n != 0} exp(-i k.r_n) p.D(r_n).p
    decay / gamma = 1 + 2 Im sum_{n != 0} exp(-i k.r_n) p.D(r_n).p

with ``p`` the (real, unit) dipole orientation.  The single-atom term is
added explicitly; sums never include the self site.

Infinite-lattice sums use a Gaussian taper ``exp(-r^2/R^2)``.  The
tapered sum differs from the infinite-lattice value by a power series in
``1/(qR)^2`` (plus terms exponentially small away from the light-cone
edge), so sums at ``R^2 = R_0^2 2^j`` are Richardson-extrapolated until
successive extrapolants agree to ``tol``.
"""
from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

__all__ = [
    "LatticeSpec",
    "GaussianWeights",
    "KernelSample",
    "DisorderConfig",
    "DisorderScan",
    "LatticeSumError",
    "gaussian_weights",
    "free_space_kernel",
    "collective_shift_decay",
    "diffraction_order_decay",
    "mode_mixing_kernel",
    "scattering_fraction",
    "far_field_power",
    "disorder_scattering_scan",
]

log = logging.getLogger(__name__)


class LatticeSumError(RuntimeError):
    """Real-space lattice sum did not converge within the maximum radius."""

    def __init__(self, message: str, partial_sums=None):
        super().__init__(message)
        self.partial_sums = partial_sums or []


@dataclass(frozen=True)
class LatticeSpec:
    """Square ``nx`` x ``ny`` array with spacing ``a`` (lengths in metres)."""

    nx: int
    ny: int
    a: float
    wavelength: float
    w: float
    dipole: tuple = (1.0, 0.0, 0.0)
    gamma: float = 2 * math.pi * 6e6

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("nx and ny must be >= 1")
        if not (self.a > 0 and self.wavelength > 0 and self.w > 0):
            raise ValueError("a, wavelength and w must be positive")
        if self.a >= self.wavelength:
            raise ValueError("lattice spacing must be below the wavelength")
        p = np.asarray(self.dipole, dtype=float)
        if p.shape != (3,) or not np.isclose(np.linalg.norm(p), 1.0):
            raise ValueError("dipole must be a real unit 3-vector")

    @property
    def q(self) -> float:
        return 2 * math.pi / self.wavelength

    @property
    def n_sites(self) -> int:
        return self.nx * self.ny

    @property
    def diameter(self) -> float:
        return min(self.nx, self.ny) * self.a

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.dipole, dtype=float)

    def positions(self) -> np.ndarray:
        """In-plane site coordinates centred on the array, shape (N, 2)."""
        x = (np.arange(self.nx) - (self.nx - 1) / 2) * self.a
        y = (np.arange(self.ny) - (self.ny - 1) / 2) * self.a
        X, Y = np.meshgrid(x, y, indexing="xy")
        return np.column_stack([X.ravel(), Y.ravel()])

    def resized(self, nx: int, ny: int | None = None) -> "LatticeSpec":
        return LatticeSpec(nx, nx if ny is None else ny, self.a, self.wavelength, self.w,
                           self.dipole, self.gamma)


@dataclass
class GaussianWeights:
    weights: np.ndarray
    norm: float
    flagged: bool
    message: str = ""


def gaussian_weights(spec: LatticeSpec, tol: float = 1e-3) -> GaussianWeights:
    """Mechanical-mode weights ``V_n = (2/sqrt(pi)) (a/w) exp(-2 r_n^2 / w^2)``.

    ``norm`` is ``sum V_n^2``, which tends to one for a large, finely
    sampled spot.  The result is flagged when the array is narrower than
    four waists or the normalisation misses one by more than ``tol``.
    """
    r2 = np.sum(spec.positions() ** 2, axis=1)
    V = (2 / math.sqrt(math.pi)) * (spec.a / spec.w) * np.exp(-2 * r2 / spec.w**2)
    norm = float(np.sum(V**2))
    reasons = []
    if spec.diameter < 4 * spec.w:
        reasons.append(f"array diameter {spec.diameter:.3g} m < 4w")
    if abs(1 - norm) > tol:
        reasons.append(f"normalisation deficit {1 - norm:.3e}")
    if reasons:
        log.warning("gaussian weights flagged: %s", "; ".join(reasons))
    return GaussianWeights(V, norm, bool(reasons), "; ".join(reasons))


def _green_terms(qr):
    """Isotropic and radial coefficients of G(r) * 4 pi r exp(-i q r)."""
    inv = 1.0 / qr
    A = 1 + 1j * inv - inv**2
    B = -1 - 3j * inv + 3 * inv**2
    return A, B


def free_space_kernel(r, r_prime, q: float) -> np.ndarray:
    """Dyadic kernel ``D(r - r')`` in units of gamma (3x3 complex).

    ``D = (3 pi / q) exp(iqR)/(4 pi R) [A I + B R^ R^]`` with ``R = r - r'``.
    """
    R = np.asarray(r, dtype=float) - np.asarray(r_prime, dtype=float)
    d = float(np.linalg.norm(R))
    if d == 0:
        raise ValueError("coincident points: the self term is not part of the kernel")
    A, B = _green_terms(q * d)
    u = R / d
    pref = (3 * math.pi / q) * np.exp(1j * q * d) / (4 * math.pi * d)
    return pref * (A * np.eye(3) + B * np.outer(u, u))


def _projected_kernel(R: np.ndarray, q: float, p: np.ndarray) -> np.ndarray:
    """``p.D(R).p`` for separations ``R`` of shape (..., 3); R != 0."""
    d = np.linalg.norm(R, axis=-1)
    A, B = _green_terms(q * d)
    c = (R @ p) / d
    return (3 / 4) * np.exp(1j * q * d) / (q * d) * (A + B * c**2)


@dataclass(frozen=True)
class KernelSample:
    k_perp: tuple
    shift_over_gamma: float
    decay_over_gamma: float
    convergence_radius: float
    gamma: float

    @property
    def shift(self) -> float:
        return self.shift_over_gamma * self.gamma

    @property
    def decay(self) -> float:
        return self.decay_over_gamma * self.gamma


def _tapered_sum(spec: LatticeSpec, k: np.ndarray, R: float) -> complex:
    a = spec.a
    M = int(math.ceil(6 * R / a))
    i = np.arange(-M, M + 1)
    X, Y = np.meshgrid(i * a, i * a, indexing="xy")
    X, Y = X.ravel(), Y.ravel()
    r2 = X**2 + Y**2
    keep = (r2 > 0) & (r2 < 36 * R * R)
    X, Y, r2 = X[keep], Y[keep], r2[keep]
    sep = np.column_stack([X, Y, np.zeros_like(X)])
    vals = _projected_kernel(sep, spec.q, spec.p)
    phase = np.exp(-1j * (k[0] * X + k[1] * Y))
    return complex(np.sum(vals * phase * np.exp(-r2 / R**2)))


def _in_zone(spec: LatticeSpec, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if k.shape != (2,):
        raise ValueError("k_perp must be a 2-vector")
    if np.any(np.abs(k) > math.pi / spec.a * (1 + 1e-12)):
        raise ValueError("k_perp lies outside the first Brillouin zone")
    return k


def collective_shift_decay(spec: LatticeSpec, k_perp, tol: float = 1e-6,
                           r0_wavelengths: float = 8.0, max_wavelengths: float = 128.0) -> KernelSample:
    """Cooperative shift and decay of the infinite-lattice mode ``k_perp``.

    ``nx``/``ny`` of ``spec`` are not used here.  Raises
    :class:`LatticeSumError` (with the partial sums) when the
    extrapolated value has not settled to ``tol`` (units of gamma) by
    ``R = max_wavelengths * lambda``.
    """
    k = _in_zone(spec, k_perp)
    lam = spec.wavelength
    radii, sums, extrap = [], [], []
    R = r0_wavelengths * lam
    table = []
    while R <= max_wavelengths * lam * (1 + 1e-12):
        radii.append(R)
        sums.append(_tapered_sum(spec, k, R))
        # Richardson in h = 1/R^2 with ratio 2 between levels
        row = [sums[-1]]
        for j, prev in enumerate(table[-1] if table else []):
            fac = 2 ** (j + 1)
            row.append((fac * row[j] - prev) / (fac - 1))
            if j + 1 >= 2:
                break
        table.append(row)
        extrap.append(row[-1])
        if len(extrap) >= 3 and abs(extrap[-1] - extrap[-2]) < tol and abs(extrap[-2] - extrap[-3]) < 10 * tol:
            S = extrap[-1]
            return KernelSample(tuple(map(float, k)), float(-S.real), float(1 + 2 * S.imag),
                                float(R), spec.gamma)
        R *= math.sqrt(2)
    raise LatticeSumError(
        f"lattice sum for k={tuple(k)} not converged to {tol:g} by R={max_wavelengths:g} lambda",
        partial_sums=list(zip(radii, sums, extrap)))


def diffraction_order_decay(spec: LatticeSpec, k_perp) -> float:
    """Decay / gamma of an infinite array radiating into the zeroth order only.

    Energy balance for a phased dipole sheet gives
    ``(3/4pi) (lambda/a)^2 |p x k_hat|^2 q / k_z``, summed over the two
    emission directions; zero outside the light cone.
    """
    k = np.asarray(k_perp, dtype=float)
    q = spec.q
    kz2 = q * q - k @ k
    if kz2 <= 0:
        return 0.0
    kz = math.sqrt(kz2)
    p = spec.p
    pol = 0.0
    for s in (1, -1):
        khat = np.array([k[0], k[1], s * kz]) / q
        pol += 1 - (p @ khat) ** 2
    return float((3 / (4 * math.pi)) * (spec.wavelength / spec.a) ** 2 * (pol / 2) * q / kz)


def mode_mixing_kernel(spec: LatticeSpec, k_list) -> np.ndarray:
    """Finite-array decay matrix ``gamma_{kk'}`` (units of gamma) of the flat array.

    ``(1/N) sum_{n,n'} exp(i k.r_n) Gamma(r_n - r_n') exp(-i k'.r_n')``
    with ``Gamma(r) = 2 Im p.D(r).p`` and ``Gamma(0) = 1``.  Pairs are
    grouped by lattice displacement, so the cost scales with ``nx*ny``.
    """
    ks = np.atleast_2d(np.asarray(k_list, dtype=float))
    for k in ks:
        _in_zone(spec, k)
    nx, ny, a = spec.nx, spec.ny, spec.a
    dx = np.arange(-(nx - 1), nx)
    dy = np.arange(-(ny - 1), ny)
    DX, DY = np.meshgrid(dx, dy, indexing="xy")
    sep = np.column_stack([DX.ravel() * a, DY.ravel() * a, np.zeros(DX.size)])
    gam = np.ones(DX.size)
    nz = np.any(sep != 0, axis=1)
    gam[nz] = 2 * np.imag(_projected_kernel(sep[nz], spec.q, spec.p))

    def overlap(n, d, dk):
        # sum_{m in [max(0,-d), min(n, n-d))} exp(i dk m a), per displacement d
        lo = np.maximum(0, -d)
        cnt = n - np.abs(d)
        z = np.exp(1j * dk * a)
        centre = np.exp(-0.5j * dk * a * (n - 1))  # sites sit symmetric about the origin
        if abs(z - 1) < 1e-14:
            return centre * cnt.astype(complex)
        return centre * z**lo * (1 - z**cnt) / (1 - z)

    N = spec.n_sites
    out = np.empty((len(ks), len(ks)), dtype=complex)
    for i, k in enumerate(ks):
        for j, kp in enumerate(ks):
            dk = k - kp
            # r_n = r_n' + d:  exp(i k.d) exp(i (k - k').r_n')
            ox = overlap(nx, dx, dk[0])
            oy = overlap(ny, dy, dk[1])
            geo = np.outer(oy, ox).ravel()
            ph = np.exp(1j * (k[0] * sep[:, 0] + k[1] * sep[:, 1]))
            out[i, j] = np.sum(gam * ph * geo) / N
    return out


# ---------------------------------------------------------------- disorder


@dataclass(frozen=True)
class DisorderConfig:
    eta_grid: tuple
    n_samples: int = 50
    seed: int = 0
    z0_phase: float = math.pi / 4
    n_jobs: int = 1

    def __post_init__(self):
        eta = np.asarray(self.eta_grid, dtype=float)
        if eta.size < 1 or np.any(eta <= 0) or np.any(eta >= 0.5):
            raise ValueError("eta values must lie in (0, 0.5)")
        if self.n_samples < 10:
            raise ValueError("n_samples must be >= 10")


@dataclass
class DisorderScan:
    eta: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    samples: np.ndarray
    exponent: float
    ci: tuple
    recommendations: list = field(default_factory=list)

    def summary(self) -> dict:
        return {"exponent": self.exponent, "ci": list(self.ci),
                "recommendations": list(self.recommendations)}


class _SheetGeometry:
    """Sites, mode pattern and k-space quadrature shared by all samples."""

    def __init__(self, spec: LatticeSpec, prune: float = 1e-8, k_extent: float = 10.0,
                 k_points_per_w: float = 12.0):
        if spec.diameter < 4 * spec.w:
            raise ValueError("array diameter must be at least 4 waists")
        q, w = spec.q, spec.w
        if k_extent / w >= q:
            raise ValueError("waist too small: the mode pattern is not paraxial")
        pos = spec.positions()
        prof = np.exp(-np.sum(pos**2, axis=1) / w**2)
        keep = prof >= prune
        self.spec = spec
        self.rho = pos[keep]
        self.profile = prof[keep]
        dk = 2 * math.pi / (k_points_per_w * w)
        n = int(math.ceil(k_extent / w / dk))
        kk = np.arange(-n, n + 1) * dk
        KX, KY = np.meshgrid(kk, kk, indexing="xy")
        self.kx, self.ky = KX.ravel(), KY.ravel()
        self.kz = np.sqrt(q * q - self.kx**2 - self.ky**2)
        p = spec.p
        base = (3 * math.pi / q) / (4 * math.pi**2) / (2 * self.kz) * dk * dk
        self.weights = []
        for s in (1, -1):
            proj = (p[0] * self.kx + p[1] * self.ky + s * p[2] * self.kz) / q
            self.weights.append(base * (1 - proj**2))
        self.inplane_phase = np.exp(-1j * (np.outer(self.kx, self.rho[:, 0]) +
                                           np.outer(self.ky, self.rho[:, 1])))
        self.S = self.inplane_phase @ self.profile
        d = self.rho[:, None, :] - self.rho[None, :, :]
        self._dxy = d
        self._dxy2 = np.sum(d**2, axis=-1)
        self._pxy = d @ p[:2]

    def total_power(self, amp: np.ndarray, dz: np.ndarray) -> float:
        """sum_{nm} d_n d_m 2 Im p.D(r_n - r_m).p with the self term 1."""
        q, p = self.spec.q, self.spec.p
        z = dz[:, None] - dz[None, :]
        r = np.sqrt(self._dxy2 + z * z)
        np.fill_diagonal(r, 1.0)
        c = (self._pxy + p[2] * z) / r
        qr = q * r
        s, co = np.sin(qr), np.cos(qr)
        # 2 Im of (3/4) e^{iqr}/(qr) (A + B c^2), written out in real arithmetic
        inv = 1 / qr
        im_iso = s * (1 - inv**2) + co * inv
        im_rad = s * (-1 + 3 * inv**2) - 3 * co * inv
        K = 1.5 * inv * (im_iso + im_rad * c * c)
        np.fill_diagonal(K, 1.0)
        return float(amp @ K @ amp)

    def cavity_power(self, amp: np.ndarray, dz: np.ndarray) -> float:
        total = 0.0
        for s, W in zip((1, -1), self.weights):
            A = (self.inplane_phase * np.exp(-1j * s * np.outer(self.kz, dz))) @ amp
            num = np.sum(W * np.conj(self.S) * A)
            den = np.sum(W * np.abs(self.S) ** 2)
            total += abs(num) ** 2 / den
        return float(total)


def _amplitudes(geo: _SheetGeometry, dz: np.ndarray, z0_phase: float) -> np.ndarray:
    return geo.profile * np.sin(z0_phase + geo.spec.q * dz)


def scattering_fraction(spec: LatticeSpec, dz=None, z0_phase: float = math.pi / 4,
                        geometry: _SheetGeometry | None = None) -> float:
    """Fraction of the radiated power that misses the cavity mode.

    The array is driven by the standing-wave cavity mode: site ``n``
    carries a dipole ``exp(-r_n^2/w^2) sin(z0_phase + q dz_n)``, where
    ``dz`` are longitudinal displacements on the retained (pruned) sites.
    The cavity mode is taken as the forward and backward field radiated by
    the ordered sheet (``dz = 0``).
    """
    geo = geometry or _SheetGeometry(spec)
    dz = np.zeros(len(geo.profile)) if dz is None else np.asarray(dz, dtype=float)
    if dz.shape != geo.profile.shape:
        raise ValueError(f"dz must have one entry per retained site ({geo.profile.size})")
    amp = _amplitudes(geo, dz, z0_phase)
    tot = geo.total_power(amp, dz)
    return (tot - geo.cavity_power(amp, dz)) / tot


def far_field_power(spec: LatticeSpec, amp, positions3, n_theta: int = 200, n_phi: int = 200) -> float:
    """Radiated power (units of gamma |d|^2) from the angular far-field integral.

    ``(3 / 8 pi) int dOmega |p x n|^2 |sum_n d_n exp(-i q n.r_n)|^2``; an
    independent route to the quadratic-form total used in the scan.
    """
    amp = np.asarray(amp, dtype=complex)
    r = np.asarray(positions3, dtype=float)
    # Gauss-Legendre in cos(theta), uniform in phi
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    phi = np.arange(n_phi) * 2 * math.pi / n_phi
    ct, PH = np.meshgrid(x, phi, indexing="ij")
    st = np.sqrt(1 - ct**2)
    n = np.stack([st * np.cos(PH), st * np.sin(PH), ct], axis=-1).reshape(-1, 3)
    field = np.exp(-1j * spec.q * n @ r.T) @ amp
    pol = 1 - (n @ spec.p) ** 2
    wts = np.repeat(wx, n_phi) * (2 * math.pi / n_phi)
    return float(3 / (8 * math.pi) * np.sum(wts * pol * np.abs(field) ** 2))


def _scan_one(args):
    spec, cfg, i_eta, eta = args
    geo = _SheetGeometry(spec)
    out = np.empty(cfg.n_samples)
    for s in range(cfg.n_samples):
        rng = np.random.default_rng([cfg.seed, i_eta, s])
        dz = rng.normal(0.0, eta / spec.q, size=geo.profile.size)
        out[s] = scattering_fraction(spec, dz, cfg.z0_phase, geometry=geo)
    return out


def disorder_scattering_scan(spec: LatticeSpec, cfg: DisorderConfig) -> DisorderScan:
    """Outside-scattering fraction versus Lamb-Dicke parameter.

    Displacements are Gaussian with rms ``eta / q`` (motional ground
    state).  Each (eta, sample) pair has its own random stream derived from
    ``(seed, eta index, sample index)``, so results do not depend on
    ``n_jobs``.  The exponent is the least-squares slope of
    ``log(mean)`` against ``log(eta)``; ``ci`` is its 95% interval.
    """
    etas = np.asarray(cfg.eta_grid, dtype=float)
    tasks = [(spec, cfg, i, float(e)) for i, e in enumerate(etas)]
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(cfg.n_jobs) as ex:
            samples = np.array(list(ex.map(_scan_one, tasks)))
    else:
        samples = np.array([_scan_one(t) for t in tasks])
    mean = samples.mean(axis=1)
    stderr = samples.std(axis=1, ddof=1) / math.sqrt(cfg.n_samples)
    recs = []
    for e, m, s in zip(etas, mean, stderr):
        if s > 0.1 * abs(m):
            recs.append(f"eta={e:g}: stderr {s:.2e} exceeds 10% of mean; increase n_samples")
    if len(etas) >= 2 and np.all(mean > 0):
        fit = stats.linregress(np.log(etas), np.log(mean))
        expo = float(fit.slope)
        if len(etas) > 2:
            half = float(stats.t.ppf(0.975, len(etas) - 2) * fit.stderr)
        else:
            half = math.nan
        ci = (expo - half, expo + half)
    else:
        expo, ci = math.nan, (math.nan, math.nan)
        recs.append("exponent undefined: need two or more eta values with positive scattering")
    for r in recs:
        warnings.warn(r, RuntimeWarning, stacklevel=2)
    return DisorderScan(etas, mean, stderr, samples, expo, ci, recs)
