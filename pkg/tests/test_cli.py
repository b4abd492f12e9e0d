import json
import subprocess
import sys
from pathlib import Path

import pytest

from weylstrip import __version__, cli

CW_CONFIG = {"kind": "weyl-estimate", "potential": {"family": "constant", "value": [[[1.0, 0.0]]]},
             "z_grid": [[0.0, 1.0]], "x_max": 15.0}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def run(tmp_path, cfg, out="out", extra=()):
    return cli.main(["run", write(tmp_path, cfg), "--out", str(tmp_path / out), *extra])


def report(tmp_path, out="out"):
    return json.loads((tmp_path / out / "report.json").read_text())


def test_weyl_estimate_outputs(tmp_path):
    assert run(tmp_path, CW_CONFIG) == 0
    rep = report(tmp_path)
    assert rep["tool"] == "weylstrip" and rep["version"] == __version__
    assert rep["passed"] and rep["csv"] == "weyl-estimate.csv"
    lines = (tmp_path / "out" / "weyl-estimate.csv").read_text().splitlines()
    assert lines[0] == "z_re,z_im,phi_re_0_0,phi_im_0_0,error_bound,x_max_used"
    assert len(lines) == 2
    timings = json.loads((tmp_path / "out" / "timings.json").read_text())
    assert "estimate" in timings


def test_report_matches_schema(tmp_path):
    jsonschema = pytest.importorskip("jsonschema")
    assert run(tmp_path, CW_CONFIG) == 0
    jsonschema.validate(report(tmp_path), cli.load_schema("report.schema.json"))


def test_reports_deterministic_across_threads(tmp_path):
    cfg = {"kind": "weyl-estimate", "potential": {"family": "cw", "A": 0.5, "k": 1.0, "t": 0.2},
           "z_grid": [[1.0, 1.0], [0.0, 1.0], [-1.0, 2.0]]}
    assert run(tmp_path, cfg, "a", ["--threads", "1"]) == 0
    assert run(tmp_path, cfg, "b", ["--threads", "3"]) == 0
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert (tmp_path / "a" / "weyl-estimate.csv").read_bytes() == (tmp_path / "b" / "weyl-estimate.csv").read_bytes()


def test_recover_boundary(tmp_path):
    cfg = {"kind": "recover-boundary", "initial": {"family": "cw", "A": 0.5, "k": 1.0}, "r": 4,
           "t_eval": [0.1], "quasi": {"gevrey": 1.0}}
    assert run(tmp_path, cfg) == 0
    rep = report(tmp_path)
    assert rep["summary"]["quasi_verdict"] == "quasi-analytic"
    assert len(rep["results"]) == 5


def test_recover_boundary_explicit_jet_budget(tmp_path):
    cfg = {"kind": "recover-boundary", "initial": {"family": "jet", "coeffs": [[1, 0]] * 4}, "r": 2}
    assert run(tmp_path, cfg) == 2


def test_nwave_evolve(tmp_path):
    cfg = {"kind": "nwave-evolve", "D": [2, 1], "Dhat": [1.5, 0.5],
           "solution": {"family": "plane-wave", "a": [0.1, 0.0], "kappa": 1.0},
           "t": 0.5, "z_grid": [[0.0, -2.0]]}
    assert run(tmp_path, cfg) == 0
    assert report(tmp_path)["summary"]["max_deviation"] < 1e-7


def test_nwave_bad_z_is_config_error(tmp_path):
    cfg = {"kind": "nwave-evolve", "D": [2, 1], "Dhat": [1.5, 0.5], "solution": {"family": "zero"},
           "t": 0.5, "z_grid": [[0.0, 1.0]]}
    assert run(tmp_path, cfg) == 2


@pytest.mark.parametrize("cfg", [
    {"kind": "nope"},
    {"kind": "weyl-estimate", "potential": {"family": "constant", "value": [[[1, 0]]]}},
    {"kind": "dnls-evolve", "solution": {"family": "cw", "A": 1, "k": 0}, "t": 1, "extra": 1},
    [1, 2, 3],
])
def test_config_errors(tmp_path, cfg, capsys):
    assert run(tmp_path, cfg) == 2
    assert "config error" in capsys.readouterr().err


def test_unreadable_and_malformed(tmp_path):
    assert cli.main(["run", str(tmp_path / "missing.json")]) == 2
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    assert cli.main(["run", str(p)]) == 2


def test_failed_check_exit_code(tmp_path):
    cfg = {"kind": "dnls-evolve", "solution": {"family": "cw", "A": 0.5, "k": 1.0}, "t": 0.5,
           "z_grid": [[0, 1]], "tols": [1e-4], "max_deviation": 1e-14}
    assert run(tmp_path, cfg) == 1
    assert not report(tmp_path)["passed"]


def test_numerical_failure_names_stage(tmp_path, capsys):
    cfg = {"kind": "nwave-evolve", "D": [2, 1], "Dhat": [1.5, 0.5], "solution": {"family": "zero"},
           "t": 0.5, "z_grid": [[0, -400]]}
    assert run(tmp_path, cfg) == 3
    assert "stage" in capsys.readouterr().err


def test_verify_quick(tmp_path):
    assert cli.main(["verify", "--seed", "3", "--out", str(tmp_path / "v")]) == 0
    rep = report(tmp_path, "v")
    assert rep["seed"] == 3 and rep["kind"] == "verify"


def test_threads_env(monkeypatch, tmp_path):
    monkeypatch.setenv("WEYLSTRIP_THREADS", "x")
    assert run(tmp_path, CW_CONFIG) == 2
    monkeypatch.setenv("WEYLSTRIP_THREADS", "2")
    assert run(tmp_path, CW_CONFIG) == 0


def test_version_and_module_entry():
    out = subprocess.run([sys.executable, "-m", "weylstrip", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and __version__ in out.stdout


def test_dnls_evolve_example_config(tmp_path):
    path = Path(__file__).resolve().parents[1] / "configs" / "dnls_evolve.json"
    assert cli.main(["run", str(path), "--out", str(tmp_path / "d")]) == 0
    summary = report(tmp_path, "d")["summary"]
    assert summary["max_deviation"] <= 1e-5
    levels = summary["refinement"]
    assert all(b < a for a, b in zip(levels, levels[1:]))
