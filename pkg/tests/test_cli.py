import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from confspencer import anyon as an
from confspencer import cli

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def verify(path, tmp_path, *extra):
    out = tmp_path / "report.json"
    code = cli.main(["verify", path, "--report", str(out), *extra])
    return code, json.loads(out.read_text()), out


def test_flat_config_passes_every_suite(tmp_path):
    code, rep, out = verify(str(CONFIGS / "flat.json"), tmp_path)
    assert code == 0
    names = [s["name"] for s in rep["suites"]]
    assert names == list(cli.ALL_SUITES) and len(set(names)) == len(names)
    for s in rep["suites"]:
        assert s["passed"] and s["max_residual"] <= s["tolerance"]
        assert s["identity"] and s["reference"] and s["points"] > 0
    assert rep["seed"] == 7 and rep["toolkit_version"] == "0.1.0" and len(rep["config_sha256"]) == 64
    timing = json.loads(Path(str(out) + ".timing.json").read_text())
    assert set(timing["wall_time_s"]) == set(names) and "generated_at" in timing


def test_sphere_config_passes(tmp_path):
    assert verify(str(CONFIGS / "sphere.json"), tmp_path)[0] == 0


def test_non_conformally_flat_metric_fails_weyl(tmp_path):
    code, rep, _ = verify(str(CONFIGS / "schwarzschild_like.json"), tmp_path)
    assert code == 1
    by = {s["name"]: s for s in rep["suites"]}
    assert by["curvature"]["passed"] and not by["weyl"]["passed"]


def test_bad_expression_reports_position(tmp_path, capsys):
    assert cli.main(["verify", str(CONFIGS / "bad_expression.json")]) == 2
    err = capsys.readouterr().err
    assert "line 1, column 10" in err and "config line 3" in err


@pytest.mark.parametrize("cfg", [
    {"dimension": 4},
    {"dimension": 4, "metric": {"conformally_flat": "0"}, "suites": ["nonsense"]},
    {"dimension": 4, "metric": {"conformally_flat": "0"}, "unknown_key": 1},
])
def test_schema_errors(cfg, tmp_path):
    assert cli.main(["verify", write(tmp_path, cfg)]) == 2


def test_unreadable_config(tmp_path):
    assert cli.main(["verify", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "broken.json"
    bad.write_text("{ not json")
    assert cli.main(["verify", str(bad)]) == 2


def test_runtime_error_exit_code(tmp_path):
    # the chart factor blows up inside the sampling box
    cfg = {"schema_version": 1, "dimension": 4, "metric": {"conformally_flat": "ln(x1)"},
           "suites": ["curvature"], "points": {"list": [[-0.5, 0, 0, 0]]}}
    code, rep, _ = verify(write(tmp_path, cfg), tmp_path)
    assert code == 3
    assert "error" in rep["suites"][0] and not rep["suites"][0]["passed"]


def test_suite_filter_and_tolerance_override(tmp_path):
    path = str(CONFIGS / "flat.json")
    code, rep, _ = verify(path, tmp_path, "--suite", "weyl", "--suite", "curvature")
    assert code == 0 and [s["name"] for s in rep["suites"]] == ["curvature", "weyl"]
    cfg = json.loads(Path(path).read_text())
    cfg["suites"] = ["weak_field"]
    cfg["tolerances"] = {"weak_field": 1e-9}
    code, rep, _ = verify(write(tmp_path, cfg), tmp_path)
    assert code == 1 and not rep["suites"][0]["passed"]


def test_reports_are_byte_identical(tmp_path):
    path = str(CONFIGS / "flat.json")
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli.main(["verify", path, "--report", str(a)]) == 0
    assert cli.main(["verify", path, "--report", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_report_to_stdout(capsys):
    assert cli.main(["verify", str(CONFIGS / "flat.json"), "--suite", "curvature"]) == 0
    out = capsys.readouterr()
    assert json.loads(out.out)["suites"][0]["name"] == "curvature"
    assert "PASS curvature" in out.err


def test_compute_outputs(capsys):
    assert cli.main(["compute", str(CONFIGS / "flat.json"), "--what", "schouten", "--at", "0,0,0,0"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 16 and lines[0] == "schouten[0,0] = 0"
    assert all(float(l.split("=")[1]) == 0 for l in lines)


def test_compute_potential_for_dilation_section(tmp_path, capsys):
    cfg = {"schema_version": 1, "dimension": 4, "metric": {"conformally_flat": "0"},
           "sections": [{"family": "dilation", "k": 1.5}]}
    assert cli.main(["compute", write(tmp_path, cfg), "--what", "potential_A", "--at", "0.1,0.2,0,0"]) == 0
    vals = [float(l.split("=")[1]) for l in capsys.readouterr().out.splitlines()]
    assert len(vals) == 4 and max(abs(v) for v in vals) < 1e-14


def test_compute_B_eff_matches_module(capsys):
    path = str(CONFIGS / "anyon_showcase.json")
    assert cli.main(["compute", path, "--what", "B_eff", "--at", "0.2,0.1,-0.3"]) == 0
    got = {l.split(" = ")[0]: float(l.split(" = ")[1]) for l in capsys.readouterr().out.splitlines()}
    pf, st, _, _ = cli.anyon_of(json.loads(Path(path).read_text()))
    B, _ = an.effective_faraday(pf, st.u, np.array([0.2, 0.1, -0.3]))
    assert np.allclose([got[f"B_eff[{i}]"] for i in range(3)], B, rtol=1e-15, atol=0)
    assert np.abs(B).max() > 0


def test_compute_rejects_bad_point_and_name(capsys):
    assert cli.main(["compute", str(CONFIGS / "flat.json"), "--what", "schouten", "--at", "0,0"]) == 2
    with pytest.raises(SystemExit):
        cli.main(["compute", str(CONFIGS / "flat.json"), "--what", "torsion", "--at", "0,0,0,0"])


def test_trajectory_rows_and_determinism(tmp_path):
    path = str(CONFIGS / "anyon_showcase.json")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(["trajectory", path, "--out", str(a)]) == 0
    assert cli.main(["trajectory", path, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    lines = a.read_text().splitlines()
    assert lines[0] == ",".join(an.CSV_HEADER)
    assert len(lines) - 1 == int(np.floor(2.0 / 0.01 + 1e-9)) + 1


def test_trajectory_constant_w_is_straight(tmp_path):
    out = tmp_path / "c.csv"
    assert cli.main(["trajectory", str(CONFIGS / "anyon_constant_w.json"), "--out", str(out)]) == 0
    rows = np.array([[float(v) for v in l.split(",")] for l in out.read_text().splitlines()[1:]])
    t, r, u = rows[:, 0], rows[:, 1:4], rows[:, 4:8]
    assert np.abs(u - u[0]).max() == 0
    assert np.abs(r - (r[0] + np.outer(t, u[0, 1:] / u[0, 0]))).max() < 1e-12


def test_trajectory_needs_anyon_block(tmp_path):
    assert cli.main(["trajectory", str(CONFIGS / "flat.json"), "--out", str(tmp_path / "x.csv")]) == 2


def test_schema_verb(capsys):
    assert cli.main(["schema"]) == 0
    assert json.loads(capsys.readouterr().out)["type"] == "object"


def test_console_script_runs():
    r = subprocess.run([sys.executable, "-m", "confspencer.cli", "verify", str(CONFIGS / "flat.json"),
                        "--suite", "curvature"], capture_output=True, text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["exit_code"] == 0
