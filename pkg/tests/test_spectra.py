import numpy as np
import pytest

from dirac_codazzi import spectra as sp
from dirac_codazzi.clifford import build_clifford
from dirac_codazzi.deformation import CodazziField
from dirac_codazzi.torus import TorusSpec

from conftest import hessian, non_codazzi, profile, torus


def test_analytic_oracle_examples():
    spec = torus(8)
    vals = sp.analytic_flat_spectrum(spec, 8)
    assert abs(vals[0]) == pytest.approx(np.pi, abs=1e-14)
    assert list(vals[:4]) == [-np.pi, -np.pi, np.pi, np.pi]
    flat0 = sp.analytic_flat_spectrum(torus(8, (0, 0)), 4)
    assert np.all(flat0[:2] == 0)
    bar = sp.analytic_flat_spectrum(spec, 4, np.diag([0.5, -0.5]))
    assert abs(bar[0]) == pytest.approx(np.pi / 2, abs=1e-14)
    with pytest.raises(ValueError):
        sp.analytic_flat_spectrum(spec, 0)


def test_analytic_oracle_against_brute_enumeration():
    spec = TorusSpec(((1.0, 0.4), (0.0, 1.3)), (0.5, 0.5), (8, 8))
    ks = np.array([(a, b) for a in range(-6, 7) for b in range(-6, 7)], dtype=float) + 0.5
    dual = np.linalg.inv(spec.basis).T  # physical wavevector of lattice mode k
    brute = np.sort(2 * np.pi * np.linalg.norm(ks @ dual.T, axis=1))[:10]
    vals = np.abs(sp.analytic_flat_spectrum(spec, 20))[::2]
    assert np.allclose(vals, brute, atol=1e-12)


def test_discrete_spectrum_matches_oracle(rep2):
    spec = torus(8)
    res = sp.spectrum(sp.assemble_dirac(spec, rep2), count=20)
    ref = sp.analytic_flat_spectrum(spec, 20)
    assert np.abs(np.abs(res.eigenvalues) - np.abs(ref)).max() <= 1e-10
    assert res.lambda1 == pytest.approx(np.pi, abs=1e-10)
    assert res.zero_modes == 0
    assert res.asymmetry_residual <= 1e-8


def test_spectrum_symmetric(rep2):
    res = sp.spectrum(sp.assemble_dirac(torus(8), rep2))
    assert res.is_symmetric(1e-8)


def test_skew_lattice_spectrum_in_3d():
    spec = TorusSpec(((1.0, 0.2, 0.0), (0.0, 1.1, 0.0), (0.0, 0.0, 0.9)), (0.5, 0, 0.5), (4, 4, 4))
    rep = build_clifford(3)
    res = sp.spectrum(sp.assemble_dirac(spec, rep), count=12)
    ref = sp.analytic_flat_spectrum(spec, 12, spinor_dim=2)
    assert np.abs(np.sort(np.abs(res.eigenvalues)) - np.sort(np.abs(ref))).max() <= 1e-10


@pytest.mark.parametrize("k", [(0, 0), (1, -2), (-3, 1)])
def test_dirac_squared_on_plane_wave(rep2, k):
    spec = torus(16)
    u = spec.points()
    psi = np.exp(2j * np.pi * (u @ np.array(k, float)))[..., None] * np.array([1.0, 0.3 - 0.2j])
    D2 = sp.apply_dirac(sp.apply_dirac(psi, spec, rep2), spec, rep2)
    kd = np.array(k) + np.array(spec.spin)
    assert np.abs(D2 - (2 * np.pi) ** 2 * (kd @ kd) * psi).max() <= 1e-10


@pytest.mark.parametrize("n", [2, 3])
def test_zero_modes_trivial_spin(n):
    spec = TorusSpec.square(n, 4, (0,) * n)
    rep = build_clifford(n)
    res = sp.spectrum(sp.assemble_dirac(spec, rep))
    assert res.zero_modes == rep.spinor_dim


def test_beta_identity_is_plain_dirac(rep2):
    spec = torus(8)
    a = sp.assemble_dirac(spec, rep2)
    b = sp.assemble_beta_dirac(spec, CodazziField.constant(spec, np.eye(2)), rep2)
    assert np.array_equal(a.matrix, b.matrix)


def test_constant_traceless_beta(rep2):
    spec = torus(8)
    beta = CodazziField.constant(spec, np.diag([2.0, -2.0]))
    res = sp.spectrum(sp.assemble_beta_dirac(spec, beta, rep2), count=20)
    ref = sp.analytic_flat_spectrum(spec, 20, np.diag([0.5, -0.5]))
    assert np.abs(np.abs(res.eigenvalues) - np.abs(ref)).max() <= 1e-10
    lb = sp.dbar_lambda1(spec, beta, rep2)
    assert lb == pytest.approx(np.pi / 2, abs=1e-10)
    # the deformed torus is R^2 / beta(Z^2), spanned by (2, 0) and (0, -2)
    model = TorusSpec(((2.0, 0.0), (0.0, -2.0)), (0.5, 0.0), (8, 8))
    assert sp.spectrum(sp.assemble_dirac(model, rep2)).lambda1 == pytest.approx(lb, abs=1e-10)


def test_dbar_identity_equals_plain(rep2):
    spec = torus(8)
    assert sp.dbar_lambda1(spec, CodazziField.constant(spec, np.eye(2)), rep2) == pytest.approx(np.pi, abs=1e-10)


def test_two_forms_agree(rep2):
    spec = torus(8)
    for beta in (profile(spec), hessian(spec)):
        a = sp.assemble_beta_dirac(spec, beta, rep2, "left").matrix
        b = sp.assemble_beta_dirac(spec, beta, rep2, "reindexed").matrix
        assert np.abs(a - b).max() <= 1e-12
    with pytest.raises(ValueError):
        sp.assemble_beta_dirac(spec, profile(spec), rep2, "other")


def test_profile_spectrum_weighted_symmetric(rep2):
    spec = torus(16)
    op = sp.assemble_beta_dirac(spec, profile(spec), rep2)
    assert op.weighted_asymmetry() <= 1e-10
    lb = sp.spectrum(op).lambda1
    assert lb == pytest.approx(np.pi, abs=1e-8)


def test_profile_self_convergence_small(rep2):
    vals = [sp.dbar_lambda1(torus(N), profile(torus(N)), rep2) for N in (8, 16)]
    assert vals[0] > 0 and abs(vals[0] - vals[1]) <= 1e-6 * vals[1]


def test_codazzi_gate(rep2):
    spec = torus(16)
    with pytest.raises(sp.CodazziGateError, match="residual"):
        sp.dbar_lambda1(spec, non_codazzi(spec), rep2)


def test_kernel_only_raises(rep2):
    op = sp.assemble_dirac(torus(4, (0, 0)), rep2)
    with pytest.raises(sp.SpectrumError):
        sp.spectrum(op, count=2)
    with pytest.raises(ValueError):
        sp.spectrum(op, count=0)


def test_rep_mismatch():
    with pytest.raises(ValueError):
        sp.assemble_dirac(torus(4), build_clifford(3))


def test_matrix_free_agrees_with_matrix(rep2, rng):
    spec = torus(8)
    beta = hessian(spec)
    op = sp.assemble_beta_dirac(spec, beta, rep2)
    psi = rng.normal(size=spec.grid + (2,)) + 1j * rng.normal(size=spec.grid + (2,))
    mf = sp.apply_dirac(psi, spec, rep2, beta.inverse())
    assert np.abs(mf.reshape(-1) - op.matrix @ psi.reshape(-1)).max() <= 1e-10


def test_eigenspinors_are_eigenvectors(rep2):
    spec = torus(8)
    res = sp.spectrum(sp.assemble_dirac(spec, rep2), count=4)
    for lam, psi in zip(res.eigenvalues, res.eigenspinors):
        assert np.abs(sp.apply_dirac(psi, spec, rep2) - lam * psi).max() <= 1e-10


def test_sphere_closed_form():
    assert sp.sphere_closed_form(2, 1) == (1.0, 2.0)
    assert sp.sphere_closed_form(3, 1) == (1.5, 6.0)
    for n in (2, 3, 4):
        l1, S1 = sp.sphere_closed_form(n, 1.0)
        for r in (0.5, 2.0, 7.0):
            lr, Sr = sp.sphere_closed_form(n, r)
            assert lr * r == pytest.approx(l1, rel=1e-15)
            assert Sr * r * r == pytest.approx(S1, rel=1e-15)
    for bad in ((1, 1.0), (2, 0.0), (2, -1.0), (2.5, 1.0)):
        with pytest.raises(ValueError):
            sp.sphere_closed_form(*bad)


def test_ground_state_equality_case(rep2):
    spec = torus(8)
    beta = CodazziField.constant(spec, np.diag([2.0, -2.0]))
    d = sp.spectrum(sp.assemble_dirac(spec, rep2), count=16)
    op = sp.assemble_beta_dirac(spec, beta, rep2)
    psi, lam, lbar = sp.ground_state(d, op, np.pi / 2)
    assert lam == pytest.approx(np.pi, abs=1e-10)
    assert abs(lbar) == pytest.approx(np.pi / 2, abs=1e-10)
    assert np.abs(sp.apply_dirac(psi, spec, rep2, beta.inverse()) - lbar * psi).max() <= 1e-9
