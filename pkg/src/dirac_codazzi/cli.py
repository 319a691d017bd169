"""Command line entry point.

Exit codes: 0 success, 1 hypothesis failure, 2 malformed config, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import deformation as dm
from . import estimates as est
from . import pipeline
from . import spectra as sp
from .config import ConfigError, load_config

EXIT_OK, EXIT_HYPOTHESIS, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dirac-codazzi",
                                 description="Dirac eigenvalue estimates with Codazzi tensors on model manifolds")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, helptext in (("validate", "check the hypotheses of a scenario"),
                           ("run", "evaluate spectra, bounds and equality-case residuals"),
                           ("spectrum", "compute and export the D and D_beta spectra"),
                           ("scan", "scan the free parameter c")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("config")
        p.add_argument("--grid", type=int, default=None, help="override the grid size on every axis")
        if name != "validate":
            p.add_argument("--out", default=".", help="output directory")
            p.add_argument("--dump-fields", action="store_true", help="also write fields.txt")
    p = sub.add_parser("compare", help="diff two report.txt files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--tol", type=float, default=1e-6)
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _validate(args) -> int:
    cfg = load_config(args.config)
    val = pipeline.validate(cfg, args.grid)
    for k, v in val.as_items():
        print(f"{k} = {pipeline.fmt(v)}")
    return EXIT_OK if val.passed else EXIT_HYPOTHESIS


def _run(args, only=None) -> int:
    cfg = load_config(args.config)
    outcome = pipeline.run(cfg, args.out, args.grid, args.dump_fields, only)
    for f in outcome.files:
        print(f"wrote {f}")
    for th, reason in outcome.inapplicable:
        print(f"{th}: inapplicable: {reason}", file=sys.stderr)
    return EXIT_HYPOTHESIS if outcome.inapplicable else EXIT_OK


def _compare(args) -> int:
    lines, ok = pipeline.compare_reports(pipeline.read_report(args.a), pipeline.read_report(args.b), args.tol)
    for line in lines:
        print(line)
    return EXIT_OK if ok else EXIT_HYPOTHESIS


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            return _validate(args)
        if args.command == "compare":
            return _compare(args)
        return _run(args, None if args.command == "run" else args.command)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (pipeline.HypothesisFailure, dm.NondegeneracyError, sp.CodazziGateError,
            est.TheoremInapplicable) as exc:
        print(f"hypothesis failure: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (sp.SpectrumError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
