import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import data_path
from focsyn.cli import main
from focsyn.problem import controller_to_dict, report_text
from focsyn.model import ControllerRealization


@pytest.fixture(scope="module")
def report1(tmp_path_factory):
    out = tmp_path_factory.mktemp("r") / "ex1.json"
    assert main(["synthesize", data_path("example1"), "--nc", "1", "--out", str(out)]) == 0
    return out


def test_synthesize_example1(report1):
    rep = json.loads(report1.read_text())
    assert rep["schema"] == 1
    assert rep["regime"] == "theorem1" and rep["feasibility"] == "feasible" and rep["verified"]
    assert np.array(rep["controller"]["Ac"]).shape == (1, 1)
    assert rep["montecarlo"]["passed"] == 50
    assert "recovery_residual" in rep and "synthesis_s" in rep["timings"]


def test_negative_nc(capsys):
    assert main(["synthesize", data_path("example1"), "--nc", "-1"]) == 1
    assert "nc must be ≥ 0" in capsys.readouterr().err


def test_unstabilizable(tmp_path):
    out = tmp_path / "r.json"
    assert main(["synthesize", data_path("unstabilizable"), "--nc", "0", "--out", str(out)]) == 2
    assert json.loads(out.read_text())["feasibility"] == "infeasible"


def test_missing_file(capsys):
    assert main(["synthesize", "/nonexistent/p.json", "--nc", "0"]) == 1
    assert "cannot read" in capsys.readouterr().err


def test_usage_error_is_input_error():
    with pytest.raises(SystemExit) as info:
        main(["synthesize"])
    assert info.value.code == 1


def test_unknown_key(tmp_path, capsys):
    doc = json.load(open(data_path("example1")))
    doc["synthesys"] = doc.pop("synthesis")
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    assert main(["synthesize", str(p), "--nc", "0"]) == 1
    assert "synthesys" in capsys.readouterr().err


def test_env_epsilon(monkeypatch, tmp_path):
    monkeypatch.setenv("FOCSYN_SOLVER_EPS", "1e-5")
    out = tmp_path / "r.json"
    assert main(["synthesize", data_path("example3"), "--nc", "0", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["epsilon"] == 1e-5
    monkeypatch.setenv("FOCSYN_SOLVER_EPS", "tiny")
    assert main(["synthesize", data_path("example3"), "--nc", "0"]) == 1


def _strip(path):
    rep = json.loads(path.read_text())
    rep.pop("timestamp")
    rep.pop("timings")
    return rep


def test_deterministic_reports(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        assert main(["synthesize", data_path("example3"), "--nc", "1", "--out", str(p)]) == 0
    assert _strip(a) == _strip(b)


def test_analyze_scalar(capsys):
    assert main(["analyze", "[[-1]]", "--alpha", "0.8"]) == 0
    assert "stable, margin 0.6π" in capsys.readouterr().out


def test_analyze_rotation(capsys):
    assert main(["analyze", "[[0,1],[-1,0]]", "--alpha", "1.2"]) == 0
    assert "unstable" in capsys.readouterr().out


def test_analyze_errors():
    assert main(["analyze", "[[1,2,3]]", "--alpha", "0.5"]) == 1
    assert main(["analyze", "[[1]]"]) == 1
    assert main(["analyze", "[[1]]", "--alpha", "2.5"]) == 1
    assert main(["analyze", "not a matrix", "--alpha", "0.5"]) == 1


def test_analyze_lemma_agrees(capsys):
    r = np.random.default_rng(11)
    for i in range(20):
        A = r.standard_normal((3, 3))
        alpha = (0.4, 1.3)[i % 2]
        assert main(["analyze", json.dumps(A.tolist()), "--alpha", str(alpha), "--method", "lemma"]) == 0
        out = capsys.readouterr().out
        assert "(agrees)" in out, out


def test_analyze_problem_with_controller(report1, capsys):
    assert main(["analyze", data_path("example1"), "--report", str(report1)]) == 0
    assert capsys.readouterr().out.splitlines()[-1].startswith("stable")


def test_simulate_decays(report1, tmp_path, capsys):
    out, gp = tmp_path / "t.csv", tmp_path / "t.gp"
    assert main(["simulate", data_path("example1"), str(report1), "--out", str(out), "--gnuplot", str(gp)]) == 0
    data = np.loadtxt(out, delimiter=",", skiprows=1)
    x = data[:, 1:5]
    assert np.linalg.norm(x[-1]) < 1e-2 * np.linalg.norm(x[0])
    assert "diverged" not in capsys.readouterr().err
    assert "plot" in gp.read_text()


def test_simulate_zero_x0(report1, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["simulate", data_path("example1"), str(report1), "--x0", "0,0,0", "--t-end", "1",
                 "--out", str(out)]) == 0
    assert not np.loadtxt(out, delimiter=",", skiprows=1)[:, 1:].any()


def _zero_report(tmp_path, l, m):
    p = tmp_path / "zero.json"
    p.write_text(report_text({"controller": controller_to_dict(ControllerRealization.static(np.zeros((l, m))))}))
    return p


def test_simulate_unstable_flags_diverged(tmp_path, capsys):
    # example3's open-loop plant is sector-unstable at alpha = 0.9
    rep = _zero_report(tmp_path, 2, 3)
    assert main(["simulate", data_path("example3"), str(rep), "--t-end", "5"]) == 0
    assert "diverged" in capsys.readouterr().err


def test_simulate_dimension_mismatch(report1, tmp_path):
    assert main(["simulate", data_path("example3"), str(report1)]) == 1
    assert main(["simulate", data_path("example1"), str(report1), "--x0", "1,2"]) == 1


def test_montecarlo(report1, tmp_path):
    out = tmp_path / "mc.json"
    assert main(["montecarlo", data_path("example1"), str(report1), "--count", "50", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["montecarlo"]["passed"] == 50


def test_montecarlo_vacuous(report1):
    assert main(["montecarlo", data_path("example1"), str(report1), "--count", "0"]) == 0


def test_montecarlo_destabilized(report1, tmp_path, capsys):
    rep = json.loads(report1.read_text())
    rep["controller"]["Dc"] = [[-v for v in row] for row in rep["controller"]["Dc"]]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(rep))
    out = tmp_path / "mc.json"
    assert main(["montecarlo", data_path("example1"), str(bad), "--out", str(out)]) == 4
    assert json.loads(out.read_text())["montecarlo"]["failing_samples"]
    assert "unstable samples" in capsys.readouterr().err


def test_synthesize_then_simulate_roundtrip(tmp_path):
    rep = tmp_path / "r.json"
    assert main(["synthesize", data_path("example2"), "--nc", "2", "--out", str(rep)]) == 0
    assert main(["simulate", data_path("example2"), str(rep), "--t-end", "1", "--out", str(tmp_path / "t.csv")]) == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "focsyn", "analyze", "[[-1]]", "--alpha", "0.5"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "stable" in proc.stdout
