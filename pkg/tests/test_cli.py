import shutil
from pathlib import Path

import pytest

from dirac_codazzi import pipeline
from dirac_codazzi.cli import main
from dirac_codazzi.config import ConfigError, config_from_text, parse_lines

SCEN = Path(__file__).resolve().parents[1] / "scenarios"

TRACELESS = (SCEN / "traceless_constant.cfg").read_text()


def write(tmp_path, text, name="s.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_parse_lines():
    d = parse_lines("# c\na.b = [1, 2]\n\na.c = hello\na.d = 1e-3\n")
    assert d == {"a.b": [1, 2], "a.c": "hello", "a.d": 1e-3}
    for bad in ("novalue", "a..b = 1", "a.b = 1\na.b = 2"):
        with pytest.raises(ConfigError):
            parse_lines(bad)


@pytest.mark.parametrize("text", [
    "manifold.kind = cylinder",
    "manifold.kind = torus\nmanifold.lattice = [[1,0],[0,1]]\nmanifold.spin = [0.5]\nmanifold.grid = [8,8]\nbeta.kind = constant",
    TRACELESS + "tol.margin = -1\n",
    TRACELESS.replace("run.c = 0.5", "run.c = 0"),
    TRACELESS + "foo.bar = 1\n",
    TRACELESS.replace("eq8, cor14, family", "eq99"),
    "manifold.kind = sphere\nmanifold.n = 2",
])
def test_malformed_configs(text):
    with pytest.raises(ConfigError):
        config_from_text(text)


def test_config_defaults():
    cfg = config_from_text(TRACELESS)
    assert cfg.theorems == ["eq8", "cor14", "family"]
    assert cfg.tolerances["codazzi"] == 1e-6 and cfg.tolerances["kernel"] == 1e-8
    assert len(cfg.digest) == 16


def test_validate_subcommand(capsys):
    assert main(["validate", str(SCEN / "traceless_constant.cfg")]) == 0
    assert "validation.passed = true" in capsys.readouterr().out
    assert main(["validate", str(SCEN / "trivial_spin.cfg")]) == 1
    assert "zero Dirac eigenvalue" in capsys.readouterr().out
    assert main(["validate", str(SCEN / "non_codazzi.cfg")]) == 1
    out = capsys.readouterr().out
    assert "Codazzi residual 1.25" in out


def test_exit_codes(tmp_path, capsys):
    assert main(["run", str(write(tmp_path, "manifold.kind = blob")), "--out", str(tmp_path)]) == 2
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert main(["run", str(SCEN / "trivial_spin.cfg"), "--out", str(tmp_path / "t")]) == 1
    assert main(["run", str(SCEN / "non_codazzi.cfg"), "--out", str(tmp_path / "n")]) == 1


def test_traceless_run_is_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    cfg = SCEN / "traceless_constant.cfg"
    assert main(["run", str(cfg), "--out", str(a), "--dump-fields"]) == 0
    assert main(["run", str(cfg), "--out", str(b), "--dump-fields"]) == 0
    for f in ("report.txt", "spectrum.csv", "spectrum_beta.csv", "breakdown_eq8.csv", "fields.txt"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    rep = pipeline.read_report(a / "report.txt")
    assert abs(float(rep["bound.eq8.margin"])) <= 1e-8
    assert float(rep["limiting.eq8.eq10_residual"]) <= 1e-7
    assert rep["tol.margin"] == "1e-06"
    assert (a / "spectrum.csv").read_text().startswith("#")
    lines, ok = pipeline.compare_reports(rep, pipeline.read_report(b / "report.txt"))
    assert lines == [] and ok


def test_compare_flags_tampering(tmp_path, capsys):
    out = tmp_path / "a"
    main(["run", str(SCEN / "traceless_constant.cfg"), "--out", str(out)])
    text = (out / "report.txt").read_text()
    margin = pipeline.read_report(out / "report.txt")["bound.eq8.margin"]
    bad = tmp_path / "bad.txt"
    bad.write_text(text.replace(f"bound.eq8.margin = {margin}", "bound.eq8.margin = 0.01"))
    assert main(["compare", str(out / "report.txt"), str(bad)]) == 1
    assert "bound.eq8.margin" in capsys.readouterr().out
    broken = tmp_path / "broken.txt"
    broken.write_text(text + "extra.key = 1\n")
    assert main(["compare", str(out / "report.txt"), str(broken)]) == 2


def test_sphere_run(tmp_path):
    assert main(["run", str(SCEN / "sphere2.cfg"), "--out", str(tmp_path)]) == 0
    rep = pipeline.read_report(tmp_path / "report.txt")
    assert float(rep["bound.eq1.margin"]) == 0.0
    assert abs(float(rep["bound.eq2.margin"])) <= 1e-12
    assert main(["scan", str(SCEN / "sphere2.cfg"), "--out", str(tmp_path)]) == 2


def test_scan_and_spectrum_subcommands(tmp_path):
    cfg = SCEN / "diagonal_profile_mild.cfg"
    assert main(["scan", str(cfg), "--out", str(tmp_path / "s"), "--grid", "8"]) == 0
    rows = (tmp_path / "s" / "scan.csv").read_text().splitlines()
    assert rows[0] == "c,feasible,rhs_inf,margin,reason"
    assert len(rows) - 1 >= 200
    assert any(",true," in r for r in rows) and any(",false," in r for r in rows)
    assert main(["spectrum", str(cfg), "--out", str(tmp_path / "p"), "--grid", "8"]) == 0
    assert (tmp_path / "p" / "spectrum_beta.csv").exists()
    assert not (tmp_path / "p" / "scan.csv").exists()


def test_infeasible_profile_scan_reports_inapplicable(tmp_path, capsys):
    src = (SCEN / "diagonal_profile.cfg").read_text().replace("[32, 32]", "[8, 8]")
    cfg = write(tmp_path, src)
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "scan: inapplicable" in capsys.readouterr().err
    rep = pipeline.read_report(tmp_path / "o" / "report.txt")
    assert rep["bound.scan.feasible_count"] == "0"
    assert rep["bound.eq1.margin_ok"] == "true"
    rows = (tmp_path / "o" / "scan.csv").read_text().splitlines()
    assert len(rows) - 1 >= 50


def test_grid_refinement_compare(tmp_path):
    cfg = SCEN / "diagonal_profile_mild.cfg"
    assert main(["run", str(cfg), "--out", str(tmp_path / "a"), "--grid", "8"]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "b"), "--grid", "16"]) == 0
    a = pipeline.read_report(tmp_path / "a" / "report.txt")
    b = pipeline.read_report(tmp_path / "b" / "report.txt")
    lines, _ = pipeline.compare_reports(a, b, 1e-6)
    lb = [line for line in lines if line.startswith("spectrum.lambda_bar1")]
    assert lb == [] or lb[0].endswith("PASS")


def test_module_entry_point():
    import subprocess
    import sys
    r = subprocess.run([sys.executable, "-m", "dirac_codazzi", "validate", str(SCEN / "sphere2.cfg")],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "validation.passed = true" in r.stdout
