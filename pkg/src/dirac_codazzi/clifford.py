"""Complex Clifford algebra representations and Clifford multiplication.

Generators satisfy ``g_i g_j + g_j g_i = -2 delta_ij`` and are skew-adjoint.
They are built as Jordan-Wigner strings of Pauli matrices, multiplied by ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations

import numpy as np

_I2 = np.eye(2, dtype=complex)
_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def _kron_all(factors):
    out = np.ones((1, 1), dtype=complex)
    for f in factors:
        out = np.kron(out, f)
    return out


@dataclass(frozen=True, eq=False)
class CliffordRep:
    """Irreducible complex representation of Cl(n), generators stacked as ``(n, S, S)``."""

    n: int
    gammas: np.ndarray

    @property
    def spinor_dim(self) -> int:
        return self.gammas.shape[1]

    def anticommutator_residual(self) -> float:
        n, s = self.n, self.spinor_dim
        eye = np.eye(s)
        worst = 0.0
        for i in range(n):
            for j in range(n):
                g = self.gammas
                r = g[i] @ g[j] + g[j] @ g[i] + 2.0 * (i == j) * eye
                worst = max(worst, float(np.abs(r).max()))
        return worst


@lru_cache(maxsize=None)
def _generators(n: int) -> np.ndarray:
    m = n // 2
    gens = []
    for j in range(m):
        head = [_SZ] * j
        tail = [_I2] * (m - j - 1)
        gens.append(1j * _kron_all(head + [_SX] + tail))
        gens.append(1j * _kron_all(head + [_SY] + tail))
    if n % 2:
        gens.append(1j * _kron_all([_SZ] * m))
    out = np.array(gens)
    out.setflags(write=False)
    return out


def build_clifford(n: int) -> CliffordRep:
    """Return the fixed representation of Cl(n) on C^(2^(n//2))."""
    if int(n) != n or n < 1:
        raise ValueError(f"invalid dimension n={n!r}; need an integer >= 1")
    return CliffordRep(int(n), _generators(int(n)))


def _check_spinor(psi: np.ndarray, rep: CliffordRep) -> np.ndarray:
    psi = np.asarray(psi)
    if psi.shape[-1] != rep.spinor_dim:
        raise ValueError(
            f"spinor has {psi.shape[-1]} components, representation needs {rep.spinor_dim}"
        )
    return psi


def vector_mul(v, psi, rep: CliffordRep) -> np.ndarray:
    """Clifford product ``v . psi = sum_i v_i gamma_i psi``.

    ``v`` has trailing axis ``n`` and ``psi`` trailing axis ``spinor_dim``;
    leading (grid) axes broadcast.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != rep.n:
        raise ValueError(f"vector has {v.shape[-1]} components, expected n={rep.n}")
    psi = _check_spinor(psi, rep)
    return np.einsum("...i,iab,...b->...a", v, rep.gammas, psi)


def form_basis(rep: CliffordRep, degree: int) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Increasing index tuples and the matching Clifford products for a degree."""
    if degree not in (1, 3):
        raise ValueError(f"unsupported form degree {degree}; only 1 and 3 are implemented")
    idx = list(combinations(range(rep.n), degree))
    s = rep.spinor_dim
    mats = np.empty((len(idx), s, s), dtype=complex)
    for m, tup in enumerate(idx):
        prod = np.eye(s, dtype=complex)
        for t in tup:
            prod = prod @ rep.gammas[t]
        mats[m] = prod
    return idx, mats


def form_mul(coeffs, psi, rep: CliffordRep, degree: int) -> np.ndarray:
    """Clifford action of a k-form (k = 1 or 3) on a spinor.

    ``coeffs`` carries one entry per strictly increasing index tuple, in
    ``itertools.combinations`` order, along its last axis. For k = 3 the
    entry for ``(j, k, l)`` multiplies ``gamma_j gamma_k gamma_l``.
    """
    idx, mats = form_basis(rep, degree)
    coeffs = np.asarray(coeffs)
    if coeffs.shape[-1] != len(idx):
        raise ValueError(
            f"degree-{degree} form in dimension {rep.n} has {len(idx)} components, "
            f"got {coeffs.shape[-1]}"
        )
    psi = _check_spinor(psi, rep)
    if not idx:
        return np.zeros(np.broadcast_shapes(coeffs.shape[:-1], psi.shape[:-1]) + psi.shape[-1:], complex)
    return np.einsum("...m,mab,...b->...a", coeffs, mats, psi)
