import numpy as np
import pytest

from dirac_codazzi import estimates as est
from dirac_codazzi import spectra as sp
from dirac_codazzi.deformation import CodazziField, invariants

from conftest import profile, torus


@pytest.fixture(scope="module")
def equality_state():
    from dirac_codazzi.clifford import build_clifford
    rep = build_clifford(2)
    spec = torus(8)
    beta = CodazziField.constant(spec, np.diag([2.0, -2.0]))
    d = sp.spectrum(sp.assemble_dirac(spec, rep), count=16)
    op = sp.assemble_beta_dirac(spec, beta, rep)
    psi, lam, lbar = sp.ground_state(d, op, sp.dbar_lambda1(spec, beta, rep))
    return spec, rep, beta, psi, lam, lbar


def test_equality_case_residuals(equality_state):
    spec, rep, beta, psi, lam, lbar = equality_state
    inv = invariants(beta)
    pq = est.thm12_pq(inv, 2)
    lim = est.limiting_residuals(psi, lam, lbar, pq.p, pq.q, beta.inverse(), inv, spec, rep)
    assert lim.eq10_residual <= 1e-7 and lim.eq7_residual <= 1e-7
    assert max(lim.eq6_residuals) <= 1e-9
    assert max(lim.lemma22_residuals) <= 1e-10
    assert lim.twistor_norm <= 1e-12
    assert lim.c_ratio == pytest.approx(0.5, abs=1e-10) or lim.c_ratio == pytest.approx(-0.5, abs=1e-10)
    assert dict(lim.as_items())["eq10_residual"] == lim.eq10_residual


def test_mixed_relation_coefficients_vanish(equality_state):
    spec, rep, beta, psi, lam, lbar = equality_state
    inv = invariants(beta)
    ns = np.asarray(inv.norm_inv_sq)
    assert np.all(1 + 2 * (-0.5) == 0) and np.all(1 + (-1 / ns) * ns == 0)
    assert np.all(np.asarray(inv.tr_inv) == 0)


def test_generic_spinor_has_positive_defect(rep2):
    spec = torus(16)
    beta = profile(spec)
    inv = invariants(beta)
    d = sp.spectrum(sp.assemble_dirac(spec, rep2), count=40)
    psi = d.eigenspinors[-1]
    pq = est.solve_pq(1.0, inv, 2)
    lim = est.limiting_residuals(psi, float(d.eigenvalues[-1]), np.pi, pq.p, pq.q, beta.inverse(), inv, spec, rep2)
    assert lim.twistor_norm > 1e-3
    assert lim.eq10_residual > 1e-3


def test_limiting_rejects_zero_eigenvalue(equality_state):
    spec, rep, beta, psi, *_ = equality_state
    with pytest.raises(ValueError):
        est.limiting_residuals(psi, 0.0, 1.0, -0.5, -2.0, beta.inverse(), invariants(beta), spec, rep)
