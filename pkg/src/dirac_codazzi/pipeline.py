"""Scenario evaluation: hypotheses, spectra, bounds and report files."""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import deformation as dm
from . import estimates as est
from . import spectra as sp
from .clifford import build_clifford
from .config import ConfigError, ScenarioConfig
from .torus import TorusSpec, dump_fields, scalar_curvature

log = logging.getLogger(__name__)


class HypothesisFailure(RuntimeError):
    pass


def fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return " ".join(fmt(x) for x in v)
    return str(v)


def write_report(path, items) -> None:
    with open(path, "w") as fh:
        for k, v in items:
            fh.write(f"{k} = {fmt(v)}\n")


def read_report(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if " = " in line:
            k, v = line.split(" = ", 1)
            out[k] = v
    return out


@dataclass
class TorusScenario:
    spec: TorusSpec
    beta: dm.CodazziField
    digest: str

    @property
    def rep(self):
        return build_clifford(self.spec.n)


def build_torus(cfg: ScenarioConfig, grid=None) -> TorusScenario:
    m = cfg.manifold
    try:
        spec = TorusSpec(tuple(map(tuple, m["lattice"])), tuple(m["spin"]),
                         tuple(m["grid"]) if grid is None else (int(grid),) * len(m["lattice"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid torus block: {exc}") from exc
    b = cfg.beta
    kind = b["kind"]
    try:
        if kind == "constant":
            beta = dm.CodazziField.constant(spec, b["matrix"])
        elif kind == "diagonal_profile":
            b1 = dm.TrigPoly.from_config(b["b1"])
            _bandwidth_warning(b1, spec)
            beta = dm.CodazziField.diagonal_profile(spec, b1, b["rest"])
        elif kind == "hessian":
            f = dm.TrigPoly.from_config(b["f"])
            _bandwidth_warning(f, spec)
            beta = dm.CodazziField.hessian_perturbed(spec, float(b["c0"]), f)
        else:
            beta = dm.CodazziField.samples(spec, np.load(Path(cfg.source).parent / b["samples"]))
    except KeyError as exc:
        raise ConfigError(f"beta block for kind {kind!r} is missing {exc}") from exc
    except (TypeError, OSError) as exc:
        raise ConfigError(f"invalid beta block: {exc}") from exc
    digest = hashlib.sha256(repr((spec, cfg.beta)).encode()).hexdigest()[:16]
    return TorusScenario(spec, beta, digest)


def _bandwidth_warning(poly: dm.TrigPoly, spec: TorusSpec):
    if poly.bandwidth() > min(spec.grid) / 3:
        log.warning("trig polynomial bandwidth %d exceeds N/3 = %.1f; products may alias",
                    poly.bandwidth(), min(spec.grid) / 3)


def zero_mode_count(spec: TorusSpec) -> int:
    """Harmonic spinors of the flat Dirac operator: present only for the trivial spin structure."""
    return 2 ** (spec.n // 2) if all(s == 0 for s in spec.spin) else 0


@dataclass
class Validation:
    codazzi_residual: float | None = None
    min_abs_det: float | None = None
    zero_modes: int = 0
    reasons: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.reasons

    def as_items(self):
        return [("validation.codazzi_residual", self.codazzi_residual),
                ("validation.min_abs_det_beta", self.min_abs_det),
                ("validation.zero_modes", self.zero_modes),
                ("validation.passed", self.passed),
                ("validation.reasons", "; ".join(self.reasons) or "none")]


def validate(cfg: ScenarioConfig, grid=None) -> Validation:
    tol = cfg.tolerances
    val = Validation()
    if cfg.kind == "sphere":
        est_n = int(cfg.manifold["n"])
        try:
            sp.sphere_closed_form(est_n, float(cfg.manifold["r"]))
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        val.codazzi_residual, val.min_abs_det = 0.0, 1.0
        return val
    try:
        sc = build_torus(cfg, grid)
    except dm.NondegeneracyError as exc:
        val.reasons.append(f"nondegeneracy: {exc}")
        return val
    val.codazzi_residual = dm.codazzi_residual(sc.beta)
    val.min_abs_det = float(np.abs(np.linalg.det(sc.beta.beta)).min())
    val.zero_modes = zero_mode_count(sc.spec)
    if val.codazzi_residual > tol["codazzi"]:
        val.reasons.append(f"Codazzi residual {val.codazzi_residual:.6g} exceeds {tol['codazzi']:.1e}")
    if val.min_abs_det < tol["nondegenerate"]:
        val.reasons.append(f"min |det beta| = {val.min_abs_det:.3e} below {tol['nondegenerate']:.1e}")
    if val.zero_modes:
        val.reasons.append(f"zero Dirac eigenvalue ({val.zero_modes} harmonic spinors at trivial spin structure)")
    return val


def _auto_theorems(cfg: ScenarioConfig, inv: dm.Invariants | None) -> list[str]:
    sel = cfg.theorems
    if sel and sel != ["auto"]:
        return sel
    if cfg.kind == "sphere":
        return ["eq1", "eq2", "cor12"]
    out = ["eq8"] if np.abs(inv.tr_inv).max() <= cfg.tolerances["trace"] else ["eq2"]
    if "c_range" in cfg.run:
        out.append("scan")
    return out


def _spectrum_csv(path, res: sp.SpectrumResult, digest: str, spec: TorusSpec):
    with open(path, "w") as fh:
        fh.write(f"# spec_hash = {digest}\n# grid = {fmt(spec.grid)}\n# kind = {res.kind}\n")
        fh.write(f"# asymmetry_residual = {fmt(res.asymmetry_residual)}\n")
        fh.write("index,eigenvalue\n")
        for i, v in enumerate(res.eigenvalues):
            fh.write(f"{i},{fmt(v)}\n")


def _scan_csv(path, result: est.ScanResult):
    with open(path, "w") as fh:
        fh.write("c,feasible,rhs_inf,margin,reason\n")
        for e in result.entries:
            margin = None if e.report is None else e.report.margin
            fh.write(f"{fmt(e.c)},{fmt(e.feasible)},{fmt(e.rhs_inf)},{fmt(margin)},{e.reason}\n")


def _breakdown_csv(path, rep: est.BoundReport):
    rows = rep.breakdown_rows()
    with open(path, "w") as fh:
        fh.write("node,Sterm,lambdaTerm,laplaceTerm,integrand\n")
        for r in rows:
            fh.write(",".join([str(r[0])] + [fmt(v) for v in r[1:]]) + "\n")


@dataclass
class RunOutcome:
    items: list
    inapplicable: list
    files: list


def _bound_items(name, rep: est.BoundReport, tol) -> list:
    items = [(f"bound.{name}.{k}", v) for k, v in rep.as_items()]
    items.append((f"bound.{name}.margin_tol", tol))
    items.append((f"bound.{name}.margin_ok", rep.margin >= -tol))
    return items


def run_sphere(cfg: ScenarioConfig, out: Path) -> RunOutcome:
    n, r = int(cfg.manifold["n"]), float(cfg.manifold["r"])
    lam, S = sp.sphere_closed_form(n, r)
    tol = cfg.tolerances["margin"]
    items = [("scenario.kind", "sphere"), ("scenario.n", n), ("scenario.r", r),
             ("spectrum.lambda1", lam), ("spectrum.lambda_bar1", lam), ("geometry.S_min", S)]
    inapplicable = []
    inv = dm.Invariants.of_matrix(np.eye(n)).scalar()
    for th in _auto_theorems(cfg, None):
        if th == "eq1":
            rep = est.friedrich_bound(lam, S, n)
        elif th == "eq2":
            rep = est.bound_thm11(S, lam, lam, est.solve_pq(float(cfg.run.get("c", 1.0)), inv, n), inv)
        elif th == "cor12":
            rep = est.corollary12(S, lam, lam, inv.norm_inv_sq, S, n)
        else:
            inapplicable.append((th, "not defined for sphere scenarios"))
            items.append((f"bound.{th}.status", "inapplicable: not defined for sphere scenarios"))
            continue
        items += _bound_items(th, rep, tol)
    items += _provenance(cfg, None)
    path = out / "report.txt"
    write_report(path, items)
    return RunOutcome(items, inapplicable, [path])


def _provenance(cfg: ScenarioConfig, spec: TorusSpec | None):
    items = [("provenance.config_hash", cfg.digest)]
    if spec is not None:
        items.append(("provenance.grid", spec.grid))
    items += [(f"tol.{k}", v) for k, v in sorted(cfg.tolerances.items())]
    return items


def compute_spectra(sc: TorusScenario, count: int, kernel_tol: float):
    rep = sc.rep
    d = sp.spectrum(sp.assemble_dirac(sc.spec, rep), count, kernel_tol)
    dbeta_op = sp.assemble_beta_dirac(sc.spec, sc.beta, rep)
    db = sp.spectrum(dbeta_op, count, kernel_tol)
    return d, db, dbeta_op


def run_torus(cfg: ScenarioConfig, out: Path, grid=None, dump: bool = False,
              only: str | None = None) -> RunOutcome:
    val = validate(cfg, grid)
    if not val.passed:
        raise HypothesisFailure("; ".join(val.reasons))
    sc = build_torus(cfg, grid)
    tol = cfg.tolerances
    spec, beta = sc.spec, sc.beta
    n = spec.n
    count = int(cfg.run.get("count", 20))
    count = min(count, spec.nodes * sc.rep.spinor_dim)
    files = []
    items = [("scenario.kind", "torus"), ("scenario.n", n), ("scenario.beta_kind", beta.kind)]
    items += val.as_items()

    d, db, dbeta_op = compute_spectra(sc, count, tol["kernel"])
    lam, lbar = d.lambda1, db.lambda1
    items += [("spectrum.lambda1", lam), ("spectrum.lambda_bar1", lbar),
              ("spectrum.D_zero_modes", d.zero_modes), ("spectrum.D_asymmetry", d.asymmetry_residual),
              ("spectrum.Dbeta_asymmetry", db.asymmetry_residual)]
    if only in (None, "spectrum"):
        for name, res in (("spectrum.csv", d), ("spectrum_beta.csv", db)):
            _spectrum_csv(out / name, res, sc.digest, spec)
            files.append(out / name)
    if only == "spectrum":
        return RunOutcome(items, [], files)

    inv = dm.invariants(beta)
    S = np.zeros(spec.grid)
    A = beta.inverse()
    inapplicable = []
    selected = ["scan"] if only == "scan" else _auto_theorems(cfg, inv)
    dump_extra = {}
    for th in selected:
        try:
            if th == "eq1":
                rep = est.friedrich_bound(lam, float(S.min()), n)
            elif th == "eq2":
                c = float(cfg.run["c"]) if "c" in cfg.run else _default_c(inv)
                pq = est.solve_pq(c, inv, n)
                rep = est.bound_thm11(S, lam, lbar, pq, inv, spec)
                items += _limiting_items(th, d, dbeta_op, lbar, pq.p, pq.q, A, inv, spec, sc.rep)
            elif th == "eq8":
                rep = est.bound_thm12(S, lam, lbar, inv, n, spec, tol["trace"])
                pq = est.thm12_pq(inv, n)
                items += _limiting_items(th, d, dbeta_op, lbar, pq.p, pq.q, A, inv, spec, sc.rep)
            elif th == "cor12":
                _require_constant(inv)
                sbar = float(scalar_curvature(dm.deform_metric(beta), spec).min())
                rep = est.corollary12(float(S.min()), lam, lbar, float(inv.norm_inv_sq.flat[0]), sbar, n)
            elif th in ("cor14", "minimal_surface"):
                if n != 2 or np.abs(np.trace(beta.beta, axis1=-2, axis2=-1)).max() > tol["trace"]:
                    raise est.TheoremInapplicable("needs a traceless Codazzi tensor on a surface")
                a = np.sqrt(np.abs(np.linalg.det(beta.beta)))
                if th == "cor14":
                    rep = est.corollary14(S, a, lam, lbar, spec)
                else:
                    rep = est.minimal_surface_bound(float(cfg.run.get("kappa", 0.0)), a, lam, lbar, spec)
            elif th == "family":
                _require_constant(inv)
                si = inv.scalar()
                c = float(cfg.run.get("c", 1.0))
                margin = est.family_inequality(c, lam, lbar, float(S.min()), si.tr_inv, si.norm_inv_sq, n)
                items += [("bound.family.c", c), ("bound.family.margin", margin),
                          ("bound.family.margin_tol", tol["margin"]),
                          ("bound.family.margin_ok", margin >= -tol["margin"])]
                continue
            elif th == "scan":
                cmin, cmax = cfg.run.get("c_range", [0.2, 5.0])
                steps = int(cfg.run.get("steps", 50))
                result = est.scan_c(float(cmin), float(cmax), steps, S, lam, lbar, inv, n, spec,
                                    raise_empty=False)
                _scan_csv(out / "scan.csv", result)
                files.append(out / "scan.csv")
                feas = result.feasible_entries()
                items += [("bound.scan.c_min", float(cmin)), ("bound.scan.c_max", float(cmax)),
                          ("bound.scan.steps", steps), ("bound.scan.feasible_count", len(feas)),
                          ("bound.scan.best_c", result.best_c)]
                if result.best is None:
                    raise est.TheoremInapplicable(f"no feasible c among {len(result.entries)} scanned values")
                worst = min(e.report.margin for e in feas)
                items += [("bound.scan.best_rhs_inf", result.best.rhs_inf),
                          ("bound.scan.min_margin", worst), ("bound.scan.margin_tol", tol["margin"]),
                          ("bound.scan.margin_ok", worst >= -tol["margin"])]
                continue
            else:
                raise est.TheoremInapplicable("unknown theorem")
        except est.TheoremInapplicable as exc:
            inapplicable.append((th, str(exc)))
            items.append((f"bound.{th}.status", f"inapplicable: {exc}"))
            continue
        items += _bound_items(th, rep, tol["margin"])
        if rep.components:
            path = out / f"breakdown_{th}.csv"
            _breakdown_csv(path, rep)
            files.append(path)
        if rep.F is not None and np.ndim(rep.F):
            dump_extra[f"F_{th}"] = rep.F
    items += _provenance(cfg, spec)
    path = out / "report.txt"
    write_report(path, items)
    files.insert(0, path)
    if dump:
        fields = {"beta": beta.beta, "tr_inv": inv.tr_inv, "norm_inv_sq": inv.norm_inv_sq,
                  "det_inv": inv.det_inv, "S": S, **dump_extra}
        dump_fields(out / "fields.txt", spec, fields)
        files.append(out / "fields.txt")
    return RunOutcome(items, inapplicable, files)


def _default_c(inv: dm.Invariants) -> float:
    try:
        return est.universal_c(inv)
    except ValueError:
        return 1.0


def _require_constant(inv: dm.Invariants):
    if not inv.is_constant():
        raise est.TheoremInapplicable("needs a Codazzi tensor with constant eigenvalues")


def _limiting_items(th, d, dbeta_op, lbar, p, q, A, inv, spec, rep):
    psi, lam_s, lbar_s = sp.ground_state(d, dbeta_op, lbar)
    lim = est.limiting_residuals(psi, lam_s, lbar_s, p, q, A, inv, spec, rep)
    return [(f"limiting.{th}.{k}", v) for k, v in lim.as_items()]


def run(cfg: ScenarioConfig, out, grid=None, dump=False, only=None) -> RunOutcome:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    if cfg.kind == "sphere":
        if only is not None:
            raise ConfigError(f"'{only}' needs a torus scenario")
        return run_sphere(cfg, out)
    return run_torus(cfg, out, grid, dump, only)


SKIP_PREFIXES = ("provenance.", "tol.")
SKIP_SUFFIXES = (".argmin",)


def compare_reports(a: dict, b: dict, tol: float = 1e-6) -> tuple[list, bool]:
    """Per-key differences between two reports; returns ``(lines, all_passed)``.

    Keys present in one report only raise ``ConfigError`` (schema mismatch).
    Identical values produce no line.
    """
    keep = lambda k: not k.startswith(SKIP_PREFIXES) and not k.endswith(SKIP_SUFFIXES)  # noqa: E731
    ka = {k for k in a if keep(k)}
    kb = {k for k in b if keep(k)}
    if ka != kb:
        raise ConfigError(f"report schemas differ: {sorted(ka ^ kb)}")
    lines, ok = [], True
    for k in sorted(ka):
        va, vb = a[k], b[k]
        if va == vb:
            continue
        try:
            xa, xb = float(va), float(vb)
        except ValueError:
            lines.append(f"{k}: {va!r} != {vb!r} FAIL")
            ok = False
            continue
        diff = abs(xa - xb)
        passed = diff <= tol
        ok &= passed
        lines.append(f"{k}: {va} {vb} diff={diff:.3e} {'PASS' if passed else 'FAIL'}")
    return lines, ok
