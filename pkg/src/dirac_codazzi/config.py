"""Line-oriented ``section.key = value`` scenario files.

Values are parsed as JSON when possible (numbers, lists, quoted strings)
and kept as bare strings otherwise. ``#`` starts a comment line.

Example::

    manifold.kind = torus
    manifold.lattice = [[1, 0], [0, 1]]
    manifold.spin = [0.5, 0]
    manifold.grid = [16, 16]
    beta.kind = constant
    beta.matrix = [[2, 0], [0, -2]]
    run.theorem = eq8
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_TOLERANCES = {
    "codazzi": 1e-6,
    "nondegenerate": 1e-10,
    "kernel": 1e-8,
    "trace": 1e-8,
    "margin": 1e-6,
    "limiting": 1e-7,
}

THEOREMS = ("eq1", "eq2", "eq8", "cor12", "cor14", "minimal_surface", "family", "scan")


class ConfigError(ValueError):
    pass


def parse_lines(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or any(not part for part in key.split(".")):
            raise ConfigError(f"line {lineno}: malformed key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


@dataclass
class ScenarioConfig:
    manifold: dict
    beta: dict
    run: dict
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    digest: str = ""
    source: str = ""

    @property
    def kind(self) -> str:
        return self.manifold["kind"]

    @property
    def theorems(self) -> list[str]:
        sel = self.run.get("theorem", "auto")
        items = sel if isinstance(sel, list) else [s.strip() for s in str(sel).split(",")]
        return [s for s in items if s]


def _section(flat: dict, name: str) -> dict:
    prefix = name + "."
    return {k[len(prefix):]: v for k, v in flat.items() if k.startswith(prefix)}


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return config_from_text(raw.decode("utf-8"), source=str(path))


def config_from_text(text: str, source: str = "<string>") -> ScenarioConfig:
    flat = parse_lines(text)
    known = {"manifold", "beta", "run", "tol"}
    for key in flat:
        if key.split(".", 1)[0] not in known:
            raise ConfigError(f"unknown section in key {key!r}")
    manifold = _section(flat, "manifold")
    beta = _section(flat, "beta")
    run = _section(flat, "run")
    tol = dict(DEFAULT_TOLERANCES)
    for k, v in _section(flat, "tol").items():
        if k not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance tol.{k}")
        if not isinstance(v, (int, float)) or v < 0:
            raise ConfigError(f"tol.{k} must be a nonnegative number")
        tol[k] = float(v)
    cfg = ScenarioConfig(manifold, beta, run, tol, hashlib.sha256(text.encode()).hexdigest()[:16], source)
    _check(cfg)
    return cfg


def _need(block: dict, key: str, where: str):
    if key not in block:
        raise ConfigError(f"missing {where}.{key}")
    return block[key]


def _check(cfg: ScenarioConfig):
    kind = cfg.manifold.get("kind")
    if kind not in ("torus", "sphere"):
        raise ConfigError("manifold.kind must be 'torus' or 'sphere'")
    if kind == "torus":
        lat = _need(cfg.manifold, "lattice", "manifold")
        if not isinstance(lat, list) or not all(isinstance(r, list) for r in lat):
            raise ConfigError("manifold.lattice must be a list of rows")
        n = len(lat)
        if cfg.manifold.get("n", n) != n:
            raise ConfigError("manifold.n disagrees with the lattice basis")
        for key in ("spin", "grid"):
            v = _need(cfg.manifold, key, "manifold")
            if not isinstance(v, list) or len(v) != n:
                raise ConfigError(f"manifold.{key} must be a list of {n} numbers")
        bkind = _need(cfg.beta, "kind", "beta")
        if bkind not in ("constant", "diagonal_profile", "hessian", "samples"):
            raise ConfigError(f"unknown beta.kind {bkind!r}")
    else:
        _need(cfg.manifold, "n", "manifold")
        _need(cfg.manifold, "r", "manifold")
        if cfg.beta and cfg.beta.get("kind", "identity") != "identity":
            raise ConfigError("sphere scenarios only admit beta.kind = identity")
    for th in cfg.theorems:
        if th not in THEOREMS + ("auto",):
            raise ConfigError(f"unknown theorem selector {th!r}")
    if "c_range" in cfg.run:
        cr = cfg.run["c_range"]
        if not (isinstance(cr, list) and len(cr) == 2 and 0 < cr[0] < cr[1]):
            raise ConfigError("run.c_range must be [c_min, c_max] with 0 < c_min < c_max")
    if cfg.run.get("c", 1.0) == 0:
        raise ConfigError("run.c must be nonzero")
