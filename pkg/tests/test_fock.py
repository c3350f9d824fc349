import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atomarray_om.fock import (
    DensityMatrix, HilbertDims, ModelParams, QOperator, basis_state, build_hamiltonian,
    expectation, fig4_model, fock_density, identity, ladder, number, polaron_level,
    spectrum_undriven,
)


def test_dims_and_index():
    d = HilbertDims(2, 3)
    assert d.dim == 12
    assert d.index(1, 2) == 6
    with pytest.raises(IndexError):
        d.index(3, 0)
    with pytest.raises(ValueError):
        HilbertDims(0, 3)
    assert d.scaled(2) == HilbertDims(4, 6)


def test_ladder_matrix_elements():
    d = HilbertDims(3, 4)
    a = ladder(d, "photon")
    b = ladder(d, "phonon")
    for n in range(1, 4):
        psi = basis_state(d, n, 2)
        assert np.allclose(a @ psi, np.sqrt(n) * basis_state(d, n - 1, 2))
    assert np.allclose(b @ basis_state(d, 1, 3), np.sqrt(3) * basis_state(d, 1, 2))
    # different factors commute exactly
    assert abs((a @ b - b @ a).mat).max() == 0


def test_commutator_below_cutoff():
    d = HilbertDims(5, 5)
    a = ladder(d, "photon")
    comm = (a @ a.dag() - a.dag() @ a).toarray()
    top = [d.index(5, m) for m in range(d.phonon)]
    keep = np.setdiff1d(np.arange(d.dim), top)
    assert np.allclose(comm[np.ix_(keep, keep)], np.eye(len(keep)))


def test_operator_algebra_checks():
    d1, d2 = HilbertDims(2, 2), HilbertDims(2, 3)
    with pytest.raises(ValueError):
        ladder(d1, "photon") @ ladder(d2, "photon")
    with pytest.raises(ValueError):
        QOperator(d1, np.eye(3))
    with pytest.raises(ValueError):
        ladder(d1, "spin")
    n = number(d1, "photon")
    assert n.is_hermitian()
    assert not ladder(d1, "photon").is_hermitian()
    assert (2 * identity(d1) - identity(d1)).is_hermitian()


def test_hamiltonian_hermitian(fig4):
    d = HilbertDims(3, 8)
    H = build_hamiltonian(fig4.replace(g2=0.05), d)
    assert H.is_hermitian()


def test_density_checks():
    d = HilbertDims(2, 2)
    rho = fock_density(d, 1)
    rho.check()
    assert expectation(number(d, "photon"), rho) == pytest.approx(1.0)
    bad = DensityMatrix(d, 2 * rho.mat)
    with pytest.raises(ValueError):
        bad.check()
    neg = DensityMatrix(d, np.diag([1.5, -0.5] + [0.0] * 7))
    with pytest.raises(ValueError, match="negative"):
        neg.check()
    with pytest.raises(ValueError):
        expectation(number(HilbertDims(3, 3), "photon"), rho)


def test_spectrum_oracle_fig4():
    p = fig4_model(omega_ratio=0.0)
    p = p.replace(Omega=0.0)
    d = HilbertDims(2, 40)
    ev = spectrum_undriven(p, d)
    for n1 in range(3):
        m = d.phonon
        block = np.sort(np.linalg.eigvalsh(build_hamiltonian(p, d).toarray()[n1 * m:(n1 + 1) * m, n1 * m:(n1 + 1) * m]))
        for n2 in range(4):
            E = polaron_level(p, n1, n2)
            assert block[n2] == pytest.approx(E, rel=1e-6, abs=1e-6 * p.omega_m)
            assert np.min(np.abs(ev - E)) < 1e-6 * max(abs(E), p.omega_m)


def test_spectrum_block_matches_full():
    p = ModelParams(delta_L=-0.3, omega_m=1.0, g=0.4, kappa=0.2)
    d = HilbertDims(2, 10)
    full = np.sort(np.linalg.eigvalsh(build_hamiltonian(p, d).toarray()))
    assert np.allclose(spectrum_undriven(p, d), full, atol=1e-12)
    assert len(spectrum_undriven(p, d, 5)) == 5
    with pytest.raises(ValueError):
        spectrum_undriven(p, d, d.dim + 1)
    with pytest.raises(ValueError):
        spectrum_undriven(p.replace(Omega=0.1), d)


def test_harmonic_ladder_g0():
    p = ModelParams(delta_L=-0.7, omega_m=1.0, g=0.0, kappa=0.1)
    d = HilbertDims(2, 3)
    ev = spectrum_undriven(p, d)
    expect = sorted(0.7 * n1 + n2 for n1 in range(3) for n2 in range(4))
    assert np.allclose(ev, expect)


@settings(max_examples=25, deadline=None)
@given(g=st.floats(0.0, 0.6), dl=st.floats(-2, 2))
def test_spectrum_polaron_property(g, dl):
    p = ModelParams(delta_L=dl, omega_m=1.0, g=g, kappa=0.1)
    d = HilbertDims(2, 30)
    ev = spectrum_undriven(p, d)
    for n1 in range(3):
        E = polaron_level(p, n1, 0)
        assert np.min(np.abs(ev - E)) < 1e-8


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(delta_L=0, omega_m=0, g=0, kappa=1)
    with pytest.raises(ValueError):
        ModelParams(delta_L=0, omega_m=1, g=0, kappa=1, Omega=-1)
    p = fig4_model()
    assert p.delta_L == pytest.approx(-0.49**2)
    assert p.Omega == pytest.approx(0.05 * 0.275)
