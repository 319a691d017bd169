"""Codazzi tensors on flat tori and the deformed metric they induce.

Tensor components of ``beta`` are stored in the constant orthonormal frame
``E_i`` of the torus (see :attr:`TorusSpec.frame`); ``Lambda[..., i, j, k]``
is ``g(Lambda(E_i, E_j), E_k)`` in that frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import torus as tc
from .torus import TorusSpec


class NondegeneracyError(ValueError):
    pass


@dataclass(frozen=True)
class TrigPoly:
    """``const + sum amp * (cos|sin)(2 pi k.u)`` in lattice coordinates."""

    const: float = 0.0
    terms: tuple = ()

    def __post_init__(self):
        clean = []
        for amp, kind, k in self.terms:
            if kind not in ("cos", "sin"):
                raise ValueError(f"trig term kind must be 'cos' or 'sin', got {kind!r}")
            clean.append((float(amp), kind, tuple(int(v) for v in k)))
        object.__setattr__(self, "terms", tuple(clean))

    @classmethod
    def from_config(cls, value) -> "TrigPoly":
        """Accept a number, ``[const, [[amp, kind, [k...]], ...]]`` or a dict with those keys."""
        if isinstance(value, (int, float)):
            return cls(float(value))
        if isinstance(value, dict):
            return cls(float(value.get("const", 0.0)), tuple(value.get("terms", ())))
        const, terms = value
        return cls(float(const), tuple(terms))

    def bandwidth(self) -> int:
        return max((max(abs(v) for v in k) for _, _, k in self.terms), default=0)

    def __call__(self, u, deriv=()) -> np.ndarray:
        """Evaluate at lattice points ``u[..., n]``; ``deriv`` lists coordinate axes to differentiate."""
        u = np.asarray(u, dtype=float)
        out = np.full(u.shape[:-1], self.const if not deriv else 0.0)
        for amp, kind, k in self.terms:
            kk = np.zeros(u.shape[-1])
            kk[: len(k)] = k
            phase = 2 * np.pi * (u @ kk)
            fac = amp * np.prod([2 * np.pi * kk[a] for a in deriv]) if deriv else amp
            # cos -> -sin -> -cos -> sin -> cos
            shift = len(deriv) + (1 if kind == "sin" else 0) * 3
            val = (np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t), np.sin)[shift % 4](phase)
            out = out + fac * val
        return out


@dataclass(frozen=True, eq=False)
class CodazziField:
    """Symmetric ``beta`` in frame components on a flat torus, with its constructor tag."""

    beta: np.ndarray
    spec: TorusSpec
    kind: str = "samples"
    params: dict = field(default_factory=dict)
    min_abs_det: float = 1e-10

    def __post_init__(self):
        b = np.asarray(self.beta, dtype=float)
        shape = self.spec.grid + (self.spec.n, self.spec.n)
        if b.shape == shape[-2:]:
            b = np.broadcast_to(b, shape).copy()
        if b.shape != shape:
            raise ValueError(f"beta has shape {b.shape}, expected {shape}")
        if np.abs(b - np.swapaxes(b, -1, -2)).max() > 1e-12:
            raise ValueError("beta is not symmetric")
        b = 0.5 * (b + np.swapaxes(b, -1, -2))
        det = np.linalg.det(b)
        worst = int(np.argmin(np.abs(det)))
        if abs(det.flat[worst]) < self.min_abs_det:
            node = tuple(int(i) for i in np.unravel_index(worst, self.spec.grid))
            raise NondegeneracyError(f"beta is degenerate at node {node} (|det| = {abs(det.flat[worst]):.3e})")
        b.setflags(write=False)
        object.__setattr__(self, "beta", b)

    @property
    def n(self) -> int:
        return self.spec.n

    @classmethod
    def constant(cls, spec: TorusSpec, matrix) -> "CodazziField":
        m = np.array(matrix, dtype=float)
        return cls(m, spec, "constant", {"matrix": m.tolist()})

    @classmethod
    def diagonal_profile(cls, spec: TorusSpec, b1: TrigPoly, rest) -> "CodazziField":
        """``diag(b1(u_1), b_2, ..., b_n)``; Codazzi whenever ``b1`` depends on ``u_1`` only
        and the lattice is rectangular."""
        rest = [float(v) for v in rest]
        if len(rest) != spec.n - 1:
            raise ValueError(f"diagonal profile needs {spec.n - 1} constant entries, got {len(rest)}")
        u = spec.points()
        beta = np.zeros(spec.grid + (spec.n, spec.n))
        beta[..., 0, 0] = b1(u)
        for i, v in enumerate(rest, start=1):
            beta[..., i, i] = v
        return cls(beta, spec, "diagonal_profile", {"b1": b1, "rest": rest})

    @classmethod
    def hessian_perturbed(cls, spec: TorusSpec, c0: float, f: TrigPoly, min_eig: float = 0.05) -> "CodazziField":
        """``c0 g + Hess f``; Codazzi on a flat base since third partials commute."""
        u = spec.points()
        n = spec.n
        hess = np.empty(spec.grid + (n, n))
        for a in range(n):
            for b in range(a, n):
                hess[..., a, b] = hess[..., b, a] = f(u, deriv=(a, b))
        P = spec.frame
        beta = c0 * np.eye(n) + np.einsum("ai,...ab,bj->...ij", P, hess, P)
        eig = np.abs(np.linalg.eigvalsh(beta)).min()
        if eig < min_eig:
            raise NondegeneracyError(
                f"hessian-perturbed beta has an eigenvalue of modulus {eig:.3g} < {min_eig}"
            )
        return cls(beta, spec, "hessian", {"c0": float(c0), "f": f})

    @classmethod
    def samples(cls, spec: TorusSpec, beta) -> "CodazziField":
        return cls(np.asarray(beta, dtype=float), spec, "samples", {})

    def coordinate_components(self) -> np.ndarray:
        """``beta_ab = beta(d_a, d_b)`` in lattice coordinates."""
        Q = np.linalg.inv(self.spec.frame)
        return np.einsum("ia,...ij,jb->...ab", Q, self.beta, Q)

    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.beta)

    def is_constant(self, tol: float = 1e-14) -> bool:
        return bool(np.ptp(self.beta.reshape(-1, self.n * self.n), axis=0).max() <= tol)


@dataclass(frozen=True, eq=False)
class Invariants:
    tr_inv: np.ndarray
    norm_inv_sq: np.ndarray
    det_inv: np.ndarray
    weight: np.ndarray

    @classmethod
    def of_matrix(cls, beta) -> "Invariants":
        A = np.linalg.inv(np.asarray(beta, dtype=float))
        det = np.linalg.det(A)
        return cls(
            np.trace(A, axis1=-2, axis2=-1),
            np.einsum("...ij,...ij->...", A, A),
            det,
            np.abs(det),
        )

    def is_constant(self, tol: float = 1e-12) -> bool:
        return all(np.ptp(np.asarray(v)) <= tol * max(1.0, np.abs(v).max())
                   for v in (self.tr_inv, self.norm_inv_sq))

    def scalar(self) -> "Invariants":
        """Collapse constant fields to their first value."""
        return Invariants(*(float(np.asarray(v).flat[0]) for v in
                            (self.tr_inv, self.norm_inv_sq, self.det_inv, self.weight)))


def invariants(beta: CodazziField) -> Invariants:
    """Pointwise ``tr beta^-1``, ``|beta^-1|^2``, ``det beta^-1`` and ``|det beta^-1|``."""
    return Invariants.of_matrix(beta.beta)


def frame_gradient(f, spec: TorusSpec) -> np.ndarray:
    """``out[..., m, *tail] = E_m f``."""
    return np.stack([tc.frame_partial(f, spec, m) for m in range(spec.n)], axis=spec.n)


def codazzi_residual(beta: CodazziField) -> float:
    """Max over nodes and index triples of ``|(nabla_i beta)_jk - (nabla_j beta)_ik|``."""
    spec = beta.spec
    nb = tc.covariant_derivative_sym2(beta.coordinate_components(), spec.metric, spec)
    P = spec.frame
    nb = np.einsum("ai,bj,ck,...abc->...ijk", P, P, P, nb)
    return float(np.abs(nb - np.swapaxes(nb, -3, -2)).max())


def deform_metric(beta: CodazziField) -> np.ndarray:
    """``gbar(X, Y) = g(beta X, beta Y)`` as lattice-coordinate components."""
    spec = beta.spec
    g = spec.metric
    b11 = np.linalg.solve(g, beta.coordinate_components())  # (1,1) form: g^-1 beta
    return np.einsum("...ca,cd,...db->...ab", b11, g, b11)


def _tau(beta: CodazziField) -> np.ndarray:
    # tau[i, j, k] = g(beta((nabla_{A E_i} A)(E_j)), E_k), A = beta^-1
    A = beta.inverse()
    dA = frame_gradient(A, beta.spec)
    return np.einsum("...kl,...mi,...mlj->...ijk", beta.beta, A, dA)


def lambda_tensor(beta: CodazziField) -> np.ndarray:
    """``Lambda_ijk`` from the three-term cyclic formula for ``2 g(Lambda(X, Y), Z)``."""
    t = _tau(beta)
    perm = lambda s: np.einsum("..." + s + "->...ijk", t)  # noqa: E731
    # 2 Lambda_ijk = t_ijk - t_jik + t_kij - t_ikj + t_kji - t_jki
    return 0.5 * (t - perm("jik") + perm("kij") - perm("ikj") + perm("kji") - perm("jki"))


def omega_forms(lam: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``omega_k = sum_j Lambda_jjk`` and the cyclic 3-form over ``j < k < l``."""
    n = lam.shape[-1]
    omega = np.einsum("...jjk->...k", lam)
    idx = list(combinations(range(n), 3))
    big = np.zeros(lam.shape[:-3] + (len(idx),))
    for m, (j, k, l) in enumerate(idx):
        big[..., m] = lam[..., j, k, l] + lam[..., k, l, j] + lam[..., l, j, k]
    return omega, big


def deformed_scalar_curvature(beta: CodazziField, lam: np.ndarray, base_term=0.0) -> np.ndarray:
    """Scalar curvature of ``gbar`` through ``Lambda``.

    ``base_term`` is ``sum_ij g(E_i, R(A E_i, A E_j) E_j)``; it vanishes on a flat base.
    """
    A = beta.inverse()
    dlam = frame_gradient(lam, beta.spec)  # [..., m, i, j, k]
    deriv = 2.0 * np.einsum("...mi,...mjji->...", A, dlam)
    omega = np.einsum("...iik->...k", lam)
    return base_term + deriv - np.einsum("...k,...k->...", omega, omega) - np.einsum("...ijk,...jik->...", lam, lam)


def connection_residual(beta: CodazziField, lam: np.ndarray | None = None) -> float:
    """Max defect of ``nablabar_{A E_i}(A E_j) = A(nabla_{A E_i} E_j) + A Lambda(E_i, E_j)``."""
    spec = beta.spec
    lam = lambda_tensor(beta) if lam is None else lam
    P = spec.frame
    A = beta.inverse()
    gam = tc.christoffel(deform_metric(beta), spec)
    # coordinate components of the vector fields A E_i, column i
    W = np.einsum("am,...mi->...ai", P, A)
    dW = np.stack([tc.spectral_partial(W, spec, b) for b in range(spec.n)], axis=-3)  # [..., b, a, j]
    cov = np.einsum("...bi,...baj->...aij", W, dW) + np.einsum("...abc,...bi,...cj->...aij", gam, W, W)
    lhs = np.einsum("ma,...aij->...mij", np.linalg.inv(P), cov)
    rhs = np.einsum("...ijk,...mk->...mij", lam, A)
    return float(np.abs(lhs - rhs).max())


@dataclass(frozen=True, eq=False)
class DeformationBundle:
    gbar: np.ndarray
    lam: np.ndarray
    omega: np.ndarray
    big_omega: np.ndarray
    tr_inv: np.ndarray
    norm_inv_sq: np.ndarray
    det_inv: np.ndarray
    weight: np.ndarray

    @property
    def invariants(self) -> Invariants:
        return Invariants(self.tr_inv, self.norm_inv_sq, self.det_inv, self.weight)


def deform(beta: CodazziField) -> DeformationBundle:
    lam = lambda_tensor(beta)
    omega, big = omega_forms(lam)
    inv = invariants(beta)
    return DeformationBundle(deform_metric(beta), lam, omega, big,
                             inv.tr_inv, inv.norm_inv_sq, inv.det_inv, inv.weight)
