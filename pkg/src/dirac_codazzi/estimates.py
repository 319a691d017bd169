"""Eigenvalue estimates in terms of a Codazzi tensor.

All bounds are evaluated pointwise on the grid and reduced by the grid
minimum. ``margin = lambda1**2 - rhs_inf`` is what every test inspects.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clifford import CliffordRep
from .deformation import Invariants
from .spectra import apply_dirac, frame_spinor_gradient
from .torus import TorusSpec, laplacian, spinor_density

CONST_TOL = 1e-12


class TheoremInapplicable(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class PQSolution:
    c: float
    p: np.ndarray
    q: np.ndarray
    feasible: np.ndarray
    degenerate: np.ndarray
    mode: str = "solved"
    consistent: np.ndarray | None = None

    @property
    def all_feasible(self) -> bool:
        return bool(np.all(self.feasible))

    def infeasible_nodes(self, limit: int = 5) -> list:
        bad = np.argwhere(~np.atleast_1d(self.feasible))
        return [tuple(int(v) for v in row) for row in bad[:limit]]


def _feasible(p, q, n, norm_inv_sq, slack=1e-12):
    # Closure of the open constraint box, except q = 0 where F = -|det A|/q blows up.
    # The endpoints p = 0 (universal c) and p = -1/n, q = -1/|A|^2 (traceless case)
    # are limits of admissible choices along which the bound is continuous.
    lo_q = -1.0 / norm_inv_sq
    return ((p >= -1.0 / n - slack) & (p <= slack)
            & (q >= lo_q * (1 + slack)) & (q < 0))


def solve_pq(c: float, inv: Invariants, n: int, consistency_tol: float = 1e-9) -> PQSolution:
    """Pointwise solve of ``n p + c tr q = -1``, ``tr p + c |A|^2 q = -c``.

    Rank-deficient nodes get the minimum-norm least-squares solution and are
    only feasible when that solution satisfies the system.
    """
    if c == 0:
        raise ValueError("c must be nonzero")
    tr = np.asarray(inv.tr_inv, dtype=float)
    ns = np.asarray(inv.norm_inv_sq, dtype=float)
    tr, ns = np.broadcast_arrays(tr, ns)
    den = tr**2 - n * ns
    degenerate = np.abs(den) < 1e-10
    p, q = _pq_formula(c, tr, ns, n, np.where(degenerate, 1.0, den))
    if degenerate.any():
        mats = np.empty(tr.shape + (2, 2))
        mats[..., 0, 0] = n
        mats[..., 0, 1] = c * tr
        mats[..., 1, 0] = tr
        mats[..., 1, 1] = c * ns
        rhs = np.stack(np.broadcast_arrays(-1.0, -c * np.ones_like(tr)), axis=-1)
        sol = np.einsum("...ij,...j->...i", np.linalg.pinv(mats[degenerate]), rhs[degenerate])
        p = np.where(degenerate, 0.0, p)
        q = np.where(degenerate, 0.0, q)
        p[degenerate] = sol[:, 0]
        q[degenerate] = sol[:, 1]
    r1 = n * p + c * tr * q + 1.0
    r2 = tr * p + c * ns * q + c
    consistent = np.maximum(np.abs(r1), np.abs(r2)) <= consistency_tol * max(1.0, abs(c))
    feasible = _feasible(p, q, n, ns) & consistent
    return PQSolution(float(c), p, q, feasible, degenerate, "solved", consistent)


def closed_form_pq(c: float, tr_inv: float, norm_inv_sq: float, n: int) -> tuple[float, float]:
    """Constant solutions ``p(c)``, ``q(c)`` of the linear system."""
    if c == 0:
        raise ValueError("c must be nonzero")
    den = tr_inv**2 - n * norm_inv_sq
    if abs(den) < 1e-14 * max(1.0, n * norm_inv_sq):
        raise ValueError("degenerate system: (tr A)^2 = n |A|^2, i.e. A is a multiple of the identity")
    p, q = _pq_formula(c, np.float64(tr_inv), np.float64(norm_inv_sq), n, den)
    return float(p), float(q)


def _pq_formula(c, tr, ns, n, den):
    # p = (|A|^2 - c tr)/den written as tr (|A|^2/tr - c)/den so that the
    # universal c gives p = 0 exactly; q is read off the second row.
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(tr == 0, -1.0 / n, tr * (ns / tr - c) / den)
    q = -(1.0 + tr * p / c) / ns
    return p, q


def thm12_pq(inv: Invariants, n: int) -> PQSolution:
    """Fixed choice ``p = -1/n``, ``q = -1/|A|^2`` on the boundary of the constraint box."""
    ns = np.asarray(inv.norm_inv_sq, dtype=float)
    p = np.full_like(ns, -1.0 / n)
    q = -1.0 / ns
    feas = _feasible(p, q, n, ns)
    return PQSolution(float("nan"), p, q, feas, np.zeros_like(feas), "thm12_fixed", np.ones_like(feas))


def universal_c(inv: Invariants) -> float:
    if not inv.is_constant():
        raise ValueError("universal c needs constant invariants")
    tr = float(np.asarray(inv.tr_inv).flat[0])
    ns = float(np.asarray(inv.norm_inv_sq).flat[0])
    if abs(tr) < 1e-12:
        raise ValueError("tr(beta^-1) = 0: universal c is undefined, use the traceless estimate")
    return ns / tr


@dataclass(frozen=True, eq=False)
class BoundReport:
    theorem: str
    lambda1: float
    lambda_bar1: float | None
    rhs_inf: float
    c: float | None = None
    argmin: tuple | None = None
    components: dict = field(default_factory=dict)
    F: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def margin(self) -> float:
        return self.lambda1**2 - self.rhs_inf

    def as_items(self) -> list[tuple[str, object]]:
        items = [("theorem", self.theorem), ("lambda1", self.lambda1),
                 ("lambda_bar1", self.lambda_bar1), ("c", self.c),
                 ("rhs_inf", self.rhs_inf), ("margin", self.margin),
                 ("argmin", self.argmin)]
        items += sorted(self.extra.items())
        return items

    def breakdown_rows(self):
        """Rows ``node, Sterm, lambdaTerm, laplaceTerm, integrand`` over the flattened grid."""
        comp = self.components
        if not comp:
            return []
        cols = [np.broadcast_to(comp[k], np.shape(comp["integrand"])).reshape(-1)
                for k in ("S_term", "lambda_term", "laplace_term", "integrand")]
        return [(i,) + tuple(float(col[i]) for col in cols) for i in range(cols[0].size)]


def _is_const(f) -> bool:
    f = np.asarray(f, dtype=float)
    return f.size == 1 or np.ptp(f) <= CONST_TOL * max(1.0, np.abs(f).max())


def _laplace_ratio(F, spec: TorusSpec | None):
    """``lap(F) / F`` on the torus; zero for constant F (the only case allowed without a grid)."""
    F = np.asarray(F, dtype=float)
    if _is_const(F):
        return np.zeros_like(F)
    if spec is None:
        raise ValueError("nonconstant F needs a torus grid to evaluate its Laplacian")
    return laplacian(F, spec.metric, spec) / F


def _reduce(theorem, integrand, lambda1, lambda_bar1, c, comps, F, extra=None):
    integrand = np.asarray(integrand, dtype=float)
    i = int(np.argmin(integrand))
    node = tuple(int(v) for v in np.unravel_index(i, integrand.shape)) if integrand.ndim else ()
    return BoundReport(theorem, float(lambda1), None if lambda_bar1 is None else float(lambda_bar1),
                       float(integrand.flat[i]), c, node, comps, F, extra or {})


def bound_thm11(S, lambda1: float, lambda_bar1: float, pq: PQSolution, inv: Invariants,
                spec: TorusSpec | None = None, theorem: str = "eq2") -> BoundReport:
    """``inf { S/(4(p+1)) - q lbar^2/(p+1) + lap F/(2(p+1)F) }`` with ``F = -|det A| / q``."""
    if lambda_bar1 == 0 or lambda1 == 0:
        raise TheoremInapplicable("both lambda_1 and lambda_bar_1 must be nonzero")
    if not pq.all_feasible:
        raise TheoremInapplicable(f"(p, q) violates the constraint interval at nodes {pq.infeasible_nodes()}")
    p, q = pq.p, pq.q
    F = -np.asarray(inv.weight, dtype=float) / q
    s_term = np.asarray(S, dtype=float) / (4 * (p + 1))
    l_term = -q * lambda_bar1**2 / (p + 1)
    d_term = _laplace_ratio(F, spec) / (2 * (p + 1))
    integrand = np.broadcast_arrays(s_term + l_term + d_term)[0]
    comps = {"S_term": s_term, "lambda_term": l_term, "laplace_term": d_term, "integrand": integrand}
    c = None if np.isnan(pq.c) else pq.c
    return _reduce(theorem, integrand, lambda1, lambda_bar1, c, comps, F)


def bound_thm12(S, lambda1: float, lambda_bar1: float, inv: Invariants, n: int,
                spec: TorusSpec | None = None, trace_tol: float = 1e-8) -> BoundReport:
    """Traceless estimate ``inf { nS/(4(n-1)) + n lbar^2/((n-1)|A|^2) + n lap F/(2(n-1)F) }``,
    ``F = |det A| |A|^2``; shares the engine of :func:`bound_thm11` at the fixed ``(p, q)``."""
    tr = np.asarray(inv.tr_inv, dtype=float)
    if np.abs(tr).max() > trace_tol:
        raise TheoremInapplicable(f"tr(beta^-1) does not vanish (max |tr| = {np.abs(tr).max():.3e})")
    return bound_thm11(S, lambda1, lambda_bar1, thm12_pq(inv, n), inv, spec, theorem="eq8")


def friedrich_rhs(S_min: float, n: int) -> float:
    if n < 2:
        raise ValueError("the classical estimate needs n >= 2")
    return n * S_min / (4.0 * (n - 1))


def friedrich_bound(lambda1: float, S_min: float, n: int) -> BoundReport:
    return BoundReport("eq1", float(lambda1), None, friedrich_rhs(S_min, n))


def corollary12(S_min: float, lambda1: float, lambda_bar1: float, norm_inv_sq: float,
                Sbar_min: float, n: int) -> BoundReport:
    """Constant-eigenvalue chain ``lambda1^2 >= S/4 + lbar^2/|A|^2 >= S/4 + friedrich(Sbar)/|A|^2``."""
    first = S_min / 4.0 + lambda_bar1**2 / norm_inv_sq
    second = S_min / 4.0 + friedrich_rhs(Sbar_min, n) / norm_inv_sq
    return BoundReport("cor12", float(lambda1), float(lambda_bar1), first,
                       extra={"rhs_chain": second, "rhs_chain_gap": first - second})


def _check_a(a):
    a = np.asarray(a, dtype=float)
    if np.any(a == 0):
        raise ValueError("eigenvalue function a vanishes at some node")
    return a


def _a_term(a, spec):
    """``a^4 lap(a^-4)``."""
    return _laplace_ratio(a**-4.0, spec)


def corollary14(S, a, lambda1: float, lambda_bar1: float, spec: TorusSpec | None = None) -> BoundReport:
    """Surface estimate ``inf { S/2 + a^2 lbar^2 + a^4 lap(a^-4) }`` for a traceless Codazzi tensor."""
    a = _check_a(a)
    if spec is not None and spec.n != 2:
        raise ValueError("the surface estimate needs n = 2")
    s_term = np.asarray(S, dtype=float) / 2.0
    l_term = a**2 * lambda_bar1**2
    d_term = _a_term(a, spec)
    integrand = np.broadcast_arrays(s_term + l_term + d_term)[0]
    comps = {"S_term": s_term, "lambda_term": l_term, "laplace_term": d_term, "integrand": integrand}
    return _reduce("cor14", integrand, lambda1, lambda_bar1, None, comps, 2.0 * a**-4.0)


def minimal_surface_bound(kappa: float, a, lambda1: float, lambda_bar1: float,
                          spec: TorusSpec | None = None) -> BoundReport:
    """Minimal surface in a space form of curvature kappa: ``kappa + inf((lbar^2 - 1) a^2 + a^4 lap(a^-4))``."""
    a = _check_a(a)
    inner = np.broadcast_arrays((lambda_bar1**2 - 1.0) * a**2 + _a_term(a, spec))[0]
    rep = _reduce("minimal_surface", inner, lambda1, lambda_bar1, None, {}, 2.0 * a**-4.0,
                  {"kappa": float(kappa)})
    return BoundReport(rep.theorem, rep.lambda1, rep.lambda_bar1, kappa + rep.rhs_inf, None,
                       rep.argmin, {}, rep.F, rep.extra)


def family_inequality(c: float, lambda1: float, lambda_bar1: float, S_min: float,
                      tr_inv: float, norm_inv_sq: float, n: int) -> float:
    """Margin of ``lambda1^2 + q/(p+1) lbar^2 >= S_min/(4(p+1))`` at constant ``p(c), q(c)``."""
    p, q = closed_form_pq(c, tr_inv, norm_inv_sq, n)
    if p + 1 <= 0:
        raise ValueError(f"p(c) + 1 = {p + 1:.3g} is not positive")
    return lambda1**2 + q / (p + 1) * lambda_bar1**2 - S_min / (4 * (p + 1))


@dataclass(frozen=True, eq=False)
class ScanEntry:
    c: float
    feasible: bool
    reason: str
    report: BoundReport | None

    @property
    def rhs_inf(self):
        return None if self.report is None else self.report.rhs_inf


@dataclass(frozen=True, eq=False)
class ScanResult:
    best_c: float | None
    entries: list

    @property
    def best(self) -> ScanEntry | None:
        for e in self.entries:
            if e.c == self.best_c:
                return e
        return None

    def feasible_entries(self):
        return [e for e in self.entries if e.feasible]


class InfeasibleScan(TheoremInapplicable):
    def __init__(self, result: ScanResult):
        self.result = result
        super().__init__(f"no feasible c among {len(result.entries)} scanned values")


def c_grid(c_min: float, c_max: float, steps: int) -> np.ndarray:
    """Log-spaced values on ``[-c_max, -c_min]`` and ``[c_min, c_max]``, ascending."""
    if not 0 < c_min < c_max:
        raise ValueError("need 0 < c_min < c_max")
    if steps < 2:
        raise ValueError("steps must be >= 2")
    pos = np.geomspace(c_min, c_max, steps)
    return np.concatenate([-pos[::-1], pos])


def scan_c(c_min: float, c_max: float, steps: int, S, lambda1: float, lambda_bar1: float,
           inv: Invariants, n: int, spec: TorusSpec | None = None, raise_empty: bool = True) -> ScanResult:
    """Evaluate :func:`bound_thm11` over a symmetric log grid of c; best c maximizes ``rhs_inf``.

    For constant invariants the universal c is added to the candidates.
    """
    cs = c_grid(c_min, c_max, steps)
    if inv.is_constant() and abs(float(np.asarray(inv.tr_inv).flat[0])) >= 1e-12:
        cs = np.unique(np.append(cs, universal_c(inv)))
    entries = []
    for c in cs:
        pq = solve_pq(float(c), inv, n)
        if not pq.all_feasible:
            if not np.all(pq.consistent):
                reason = "inconsistent degenerate system"
            else:
                reason = f"constraint violated at {int(np.sum(~pq.feasible))} nodes"
            entries.append(ScanEntry(float(c), False, reason, None))
            continue
        entries.append(ScanEntry(float(c), True, "ok", bound_thm11(S, lambda1, lambda_bar1, pq, inv, spec)))
    good = [e for e in entries if e.feasible]
    best = max(good, key=lambda e: e.rhs_inf).c if good else None
    result = ScanResult(best, entries)
    if best is None and raise_empty:
        raise InfeasibleScan(result)
    return result


@dataclass(frozen=True, eq=False)
class LimitingCaseReport:
    eq6_residuals: tuple[float, float]
    eq7_residual: float
    eq10_residual: float
    lemma22_residuals: tuple[float, float]
    twistor_norm: float
    c_ratio: float

    def as_items(self):
        return [("eq6_D_residual", self.eq6_residuals[0]), ("eq6_Dbeta_residual", self.eq6_residuals[1]),
                ("eq7_residual", self.eq7_residual), ("eq10_residual", self.eq10_residual),
                ("lemma22_residual_1", self.lemma22_residuals[0]),
                ("lemma22_residual_2", self.lemma22_residuals[1]),
                ("twistor_norm", self.twistor_norm), ("c_ratio", self.c_ratio)]


def _l2(f, spec: TorusSpec) -> float:
    return float(np.sqrt(np.sum(spinor_density(f)) * spec.cell_volume))


def _killing_defect(grad, psi, lam, lbar, p, q, A, rep):
    # nabla_{E_j} psi - lam p E_j.psi - lbar q A(E_j).psi, stacked over j
    Xpsi = np.einsum("jab,...b->...ja", rep.gammas, psi)
    Apsi = np.einsum("...mj,mab,...b->...ja", A, rep.gammas, psi)
    p = np.asarray(p)[..., None, None]
    q = np.asarray(q)[..., None, None]
    return grad - lam * p * Xpsi - lbar * q * Apsi


def twistor_defect(psi, p, q, A, spec: TorusSpec, rep: CliffordRep):
    """``Q_{E_j} psi = nabla_{E_j} psi - p E_j.D psi - q A(E_j).D_beta psi``, stacked over j."""
    Dpsi = apply_dirac(psi, spec, rep)
    Dbpsi = apply_dirac(psi, spec, rep, A)
    grad = frame_spinor_gradient(psi, spec)
    Xd = np.einsum("jab,...b->...ja", rep.gammas, Dpsi)
    Ad = np.einsum("...mj,mab,...b->...ja", A, rep.gammas, Dbpsi)
    return grad - np.asarray(p)[..., None, None] * Xd - np.asarray(q)[..., None, None] * Ad


def limiting_residuals(psi, lambda1: float, lambda_bar1: float, p, q, A, inv: Invariants,
                       spec: TorusSpec, rep: CliffordRep, F=None) -> LimitingCaseReport:
    """Defects of the equality-case equations for a candidate spinor.

    ``lambda1``, ``lambda_bar1`` are the signed eigenvalues of ``psi``; ``A`` is
    the ``beta^-1`` field in frame components. Norms are L2 on the base
    volume with ``psi`` normalized to one; ``F`` defaults to ``-|det A|/q``.
    """
    if lambda1 == 0 or lambda_bar1 == 0:
        raise ValueError("limiting-case equations need nonzero eigenvalues")
    psi = np.asarray(psi, dtype=complex)
    psi = psi / _l2(psi, spec)
    n = spec.n
    A = np.broadcast_to(np.asarray(A, dtype=float), spec.grid + (n, n))
    Dpsi = apply_dirac(psi, spec, rep)
    Dbpsi = apply_dirac(psi, spec, rep, A)
    grad = frame_spinor_gradient(psi, spec)
    eq6 = (_l2(Dpsi - lambda1 * psi, spec), _l2(Dbpsi - lambda_bar1 * psi, spec))
    k7 = _killing_defect(grad, psi, lambda1, lambda_bar1, p, q, A, rep)
    ns = np.asarray(inv.norm_inv_sq, dtype=float)
    k10 = _killing_defect(grad, psi, lambda1, lambda_bar1, -1.0 / n, -1.0 / ns, A, rep)
    tr = np.asarray(inv.tr_inv, dtype=float)[..., None]
    pp, qq = np.asarray(p, dtype=float)[..., None], np.asarray(q, dtype=float)[..., None]
    l22 = (_l2((1 + n * pp) * Dpsi + qq * tr * Dbpsi, spec),
           _l2((1 + qq * ns[..., None]) * Dbpsi + pp * tr * Dpsi, spec))
    F = -np.asarray(inv.weight, dtype=float) / np.asarray(q, dtype=float) if F is None else np.asarray(F)
    Q = twistor_defect(psi, p, q, A, spec, rep)
    tw = float(np.sum(np.broadcast_to(F, spec.grid) * np.einsum("...ja,...ja->...", Q.conj(), Q).real)
               * spec.cell_volume)
    k7n = float(np.sqrt(sum(_l2(k7[..., j, :], spec) ** 2 for j in range(n))))
    k10n = float(np.sqrt(sum(_l2(k10[..., j, :], spec) ** 2 for j in range(n))))
    return LimitingCaseReport(eq6, k7n, k10n, l22, tw, lambda_bar1 / lambda1)
