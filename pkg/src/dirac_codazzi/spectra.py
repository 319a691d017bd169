"""Discretized Dirac operators on flat tori and their spectra.

Spinor fields are stored as their periodic factor: the physical section is
``exp(2 pi i delta . u) phi(u)``, so derivatives act on ``phi`` with the
shifted wavenumbers ``2 pi (k + delta)``. Pointwise quantities such as
``|psi|^2`` are the same in either form. Flattened vectors use node-major
order, ``index = node * S + spinor_component``.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .clifford import CliffordRep
from .deformation import CodazziField, codazzi_residual
from .torus import TorusSpec, spectral_partial

log = logging.getLogger(__name__)

KERNEL_TOL = 1e-8


class SpectrumError(RuntimeError):
    pass


class CodazziGateError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class DiracMatrix:
    matrix: np.ndarray
    weight: np.ndarray  # per node
    kind: str
    spec: TorusSpec
    rep: CliffordRep

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def full_weight(self) -> np.ndarray:
        return np.repeat(self.weight.reshape(-1), self.rep.spinor_dim)

    def weighted_asymmetry(self) -> float:
        WM = self.full_weight()[:, None] * self.matrix
        return float(np.abs(WM - WM.conj().T).max())


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenspinors: np.ndarray  # (count, *grid, S)
    lambda1: float
    zero_modes: int
    asymmetry_residual: float
    kind: str = "plain"

    def is_symmetric(self, tol: float = 1e-8) -> bool:
        return abs(self.eigenvalues.min() + self.eigenvalues.max()) <= tol


def analytic_flat_spectrum(spec: TorusSpec, count: int, beta_inv=None, spinor_dim=None) -> np.ndarray:
    """Lowest ``count`` eigenvalues of ``sum M_ji gamma_j E_i`` on a flat torus, by |value|.

    Each lattice mode ``k`` contributes ``+-2 pi |M G^(-1/2)(k + delta)|``,
    repeated ``spinor_dim / 2`` times (``n >= 2``). ``M`` is the constant
    ``beta^-1`` in frame components, or the identity.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    n = spec.n
    S = spinor_dim or 2 ** (n // 2)
    M = np.eye(n) if beta_inv is None else np.asarray(beta_inv, dtype=float)
    T = 2 * np.pi * M @ spec.frame.T
    smin = np.linalg.svd(T, compute_uv=False).min()
    delta = np.array(spec.spin)
    mult = max(S // 2, 1)
    K = 2
    while True:
        ks = np.array(list(itertools.product(range(-K, K + 1), repeat=n)), dtype=float)
        norms = np.linalg.norm((ks + delta) @ T.T, axis=1)
        if n == 1:
            vals = -np.sign(T[0, 0]) * ((ks[:, 0] + delta[0]) * abs(T[0, 0]))
        else:
            vals = np.concatenate([np.repeat(norms, mult), -np.repeat(norms, mult)])
        vals = vals[np.lexsort((vals, np.abs(vals)))]
        if len(vals) >= count and abs(vals[count - 1]) < smin * (K + 0.5):
            return vals[:count]
        K *= 2


def _derivative_matrix(spec: TorusSpec, axis: int) -> np.ndarray:
    """Dense shifted spectral derivative along one lattice axis, acting on node-flattened fields."""
    N = spec.grid[axis]
    k = spec.wavenumbers(axis, spec.spin[axis], nyquist="keep")
    d1 = np.fft.ifft(1j * k[:, None] * np.fft.fft(np.eye(N), axis=0), axis=0)
    out = np.ones((1, 1), dtype=complex)
    for a, Na in enumerate(spec.grid):
        out = np.kron(out, d1 if a == axis else np.eye(Na))
    return out


def frame_derivative_matrices(spec: TorusSpec) -> list[np.ndarray]:
    P = spec.frame
    Ds = [_derivative_matrix(spec, a) for a in range(spec.n)]
    return [sum(P[a, i] * Ds[a] for a in range(spec.n) if P[a, i] != 0.0) for i in range(spec.n)]


def _check_rep(spec: TorusSpec, rep: CliffordRep):
    if rep.n != spec.n:
        raise ValueError(f"Clifford representation of dimension {rep.n} on a {spec.n}-torus")


def assemble_dirac(spec: TorusSpec, rep: CliffordRep) -> DiracMatrix:
    """``D = sum_i gamma_i E_i``; the spin connection vanishes for the constant flat frame."""
    _check_rep(spec, rep)
    E = frame_derivative_matrices(spec)
    M = sum(np.kron(E[i], rep.gammas[i]) for i in range(spec.n))
    return DiracMatrix(M, np.ones(spec.nodes), "plain", spec, rep)


def twist_weight(beta: CodazziField) -> np.ndarray:
    """Node weights making ``D_beta`` self-adjoint: the volume density ``|det beta|`` of ``gbar``."""
    return np.abs(np.linalg.det(beta.beta)).reshape(-1)


def assemble_beta_dirac(spec: TorusSpec, beta: CodazziField, rep: CliffordRep, form: str = "left") -> DiracMatrix:
    """``D_beta = sum_i beta^-1(E_i) . nabla_{E_i}``.

    ``form='left'`` builds ``sum_ij A_ji gamma_j E_i``; ``'reindexed'`` builds
    ``sum_i gamma_i nabla_{A E_i}`` = ``sum_ij A_ji gamma_i E_j``.
    """
    _check_rep(spec, rep)
    if beta.spec.grid != spec.grid or beta.n != spec.n:
        raise ValueError("beta is sampled on a different grid")
    A = beta.inverse().reshape(spec.nodes, spec.n, spec.n)
    E = frame_derivative_matrices(spec)
    S = rep.spinor_dim
    M = np.zeros((spec.nodes * S,) * 2, dtype=complex)
    for i in range(spec.n):
        for j in range(spec.n):
            if form == "left":
                coef, gam, der = A[:, j, i], rep.gammas[j], E[i]
            elif form == "reindexed":
                coef, gam, der = A[:, j, i], rep.gammas[i], E[j]
            else:
                raise ValueError(f"unknown form {form!r}")
            if np.any(coef):
                M += np.kron(coef[:, None] * der, gam)
    return DiracMatrix(M, twist_weight(beta), "beta_twist", spec, rep)


def spectrum(op: DiracMatrix, count: int | None = None, kernel_tol: float = KERNEL_TOL) -> SpectrumResult:
    """Eigenpairs of the weighted self-adjoint part ``W^1/2 M W^-1/2``, sorted by |value|.

    The discarded skew part is reported as ``asymmetry_residual``.
    """
    size = op.size
    count = size if count is None else count
    if not 0 < count <= size:
        raise ValueError(f"count must be in 1..{size}")
    w = np.sqrt(op.full_weight())
    H = (w[:, None] * op.matrix) / w[None, :]
    Hh = 0.5 * (H + H.conj().T)
    asym = float(np.abs(H - Hh).max())
    try:
        vals, vecs = scipy.linalg.eigh(Hh)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise SpectrumError(f"eigensolver failed: {exc}") from exc
    order = np.lexsort((vals, np.abs(vals)))
    vals, vecs = vals[order], vecs[:, order]
    nonzero = np.abs(vals[:count]) > kernel_tol
    if not nonzero.any():
        raise SpectrumError("all retained eigenvalues are zero; lambda_1 is undefined")
    lam1 = float(np.abs(vals[:count][nonzero]).min())
    spinors = (vecs[:, :count] / w[:, None]).T.reshape((count,) + op.spec.grid + (op.rep.spinor_dim,))
    zero = int(np.sum(np.abs(vals) <= kernel_tol))
    return SpectrumResult(vals[:count], spinors, lam1, zero, asym, op.kind)


def apply_dirac(psi, spec: TorusSpec, rep: CliffordRep, beta_inv=None) -> np.ndarray:
    """Matrix-free ``D psi`` (or ``D_beta psi`` when ``beta_inv`` frame components are given)."""
    grads = frame_spinor_gradient(psi, spec)
    if beta_inv is None:
        return np.einsum("iab,...ib->...a", rep.gammas, grads)
    return np.einsum("...ji,jab,...ib->...a", np.asarray(beta_inv), rep.gammas, grads)


def frame_spinor_gradient(psi, spec: TorusSpec) -> np.ndarray:
    """``out[..., i, :] = nabla_{E_i} psi`` for the periodic factor of a spinor field."""
    psi = np.asarray(psi, dtype=complex)
    P = spec.frame
    partials = [spectral_partial(psi, spec, a, spec.spin[a], nyquist="keep") for a in range(spec.n)]
    return np.stack([sum(P[a, i] * partials[a] for a in range(spec.n)) for i in range(spec.n)], axis=-2)


def dbar_lambda1(spec: TorusSpec, beta: CodazziField, rep: CliffordRep,
                 codazzi_tol: float = 1e-6, kernel_tol: float = KERNEL_TOL) -> float:
    """Smallest nonzero |eigenvalue| of the deformed-metric Dirac operator, via ``D_beta``."""
    res = codazzi_residual(beta)
    if res > codazzi_tol:
        raise CodazziGateError(f"Codazzi residual {res:.3e} exceeds {codazzi_tol:.1e}; D_beta is not the deformed Dirac operator")
    lam = spectrum(assemble_beta_dirac(spec, beta, rep), kernel_tol=kernel_tol).lambda1
    if beta.is_constant():
        vals = np.abs(analytic_flat_spectrum(spec, 4 * rep.spinor_dim + 4, beta.inverse()[(0,) * spec.n],
                                             rep.spinor_dim))
        ref = float(vals[vals > kernel_tol].min())
        if abs(ref - lam) > 1e-8 * max(1.0, ref):
            log.warning("constant-beta lambda_1 %.12g disagrees with lattice value %.12g", lam, ref)
    return lam


def sphere_closed_form(n: int, r: float) -> tuple[float, float]:
    """Round n-sphere of radius r: smallest |Dirac eigenvalue| and scalar curvature."""
    if int(n) != n or n < 2:
        raise ValueError(f"sphere dimension must be an integer >= 2, got {n!r}")
    if not r > 0 or not math.isfinite(r):
        raise ValueError(f"radius must be positive, got {r!r}")
    return n / (2.0 * r), n * (n - 1) / r**2


def ground_state(d_spec: SpectrumResult, dbeta: DiracMatrix, lambda_bar1: float, tol: float = 1e-7):
    """Pick a spinor in the ``+lambda_1`` eigenspace of D that best diagonalizes ``D_beta``.

    Returns ``(psi, lambda, lambda_bar)`` with signed eigenvalues; ``lambda_bar``
    is the weighted Rayleigh value of ``D_beta`` on ``psi``.
    """
    vals = d_spec.eigenvalues
    target = d_spec.lambda1
    sel = np.flatnonzero(np.abs(vals - target) <= tol * max(1.0, target))
    if sel.size == 0:
        raise SpectrumError("lambda_1 eigenspace not among retained eigenpairs")
    V = d_spec.eigenspinors[sel].reshape(sel.size, -1).T
    w = dbeta.full_weight()
    gram = V.conj().T @ (w[:, None] * V)
    C = V.conj().T @ (w[:, None] * (dbeta.matrix @ V))
    C = 0.5 * (C + C.conj().T)
    mu, coef = scipy.linalg.eigh(C, gram)
    best = int(np.argmin(np.abs(np.abs(mu) - lambda_bar1)))
    psi = (V @ coef[:, best]).reshape(d_spec.eigenspinors.shape[1:])
    return psi, float(vals[sel[0]]), float(mu[best])
