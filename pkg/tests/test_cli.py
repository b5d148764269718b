import json
import shutil
import subprocess
import sys

import pytest

from mpsc.harness import bundled_config_path
from mpsc.harness.cli import EXIT_CONFIG, EXIT_OK, EXIT_SAFETY, EXIT_SOLVER, main


@pytest.fixture()
def cfg_path():
    return str(bundled_config_path())


def write_cfg(tmp_path, name, **changes):
    data = json.loads(bundled_config_path().read_text())
    data.update(changes)
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_design_and_validate(tmp_path, cfg_path):
    out = tmp_path / "design.json"
    assert main(["design", "-c", cfg_path, "-o", str(out)]) == EXIT_OK
    d = json.loads(out.read_text())
    assert d["N_s"] == 600 and d["n_s"] == 4 and d["worst_residual"] <= 1e-8
    rep = tmp_path / "validate.json"
    assert main(["validate", "-c", cfg_path, "-d", str(out), "--trials", "2000",
                 "-o", str(rep)]) == EXIT_OK
    r = json.loads(rep.read_text())
    assert r["trials"] == 2000 and r["in_sample_violations"] == 0


def test_confidence(capsys):
    assert main(["confidence", "--ns", "600", "--dims", "2", "--target", "0.97"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["n_s"] == 4 and 0 < out["epsilon"] < 0.05 and out["confidence"] >= 0.97
    assert main(["confidence", "--ns", "600", "--dims", "2", "--epsilon", "0.02"]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["confidence"] > 0.97


def test_confidence_bad_input_is_config_error(capsys):
    assert main(["confidence", "--ns", "600", "--dims", "2", "--target", "1.5"]) == EXIT_CONFIG
    assert main(["confidence", "--ns", "0", "--dims", "2"]) == EXIT_CONFIG


def test_baseline(tmp_path, cfg_path, capsys):
    assert main(["baseline", "-c", cfg_path, "--steps", "20", "-o", str(tmp_path)]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["steps"] == 20 and out["first_violation"] < 20
    assert (tmp_path / "baseline.csv").is_file()


def test_simulate(tmp_path):
    cfg = write_cfg(tmp_path, "short.json", steps=30)
    out = tmp_path / "out"
    assert main(["simulate", "-c", cfg, "-o", str(out), "--no-plots"]) == EXIT_OK
    assert (out / "trace.csv").read_text().splitlines()[0] == \
        "k,x1,x2,uL,u,interfered,feasible,branch,kinf,objective"
    s = json.loads((out / "summary.json").read_text())
    assert s["constraints"]["state_violations"] == 0


def test_exit_code_config(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"model": {}}')
    assert main(["design", "-c", str(bad)]) == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    assert main(["simulate", "-c", str(tmp_path / "none.json"), "-o", str(tmp_path)]) == \
        EXIT_CONFIG


def test_exit_code_safety(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "fault.json", x0=[0.99, 0.99], steps=5)
    assert main(["simulate", "-c", cfg, "-o", str(tmp_path / "o"), "--no-plots"]) == EXIT_SAFETY
    err = capsys.readouterr().err
    assert "safety fault [filter]" in err and '"k_inf": 20' in err


def test_exit_code_solver(tmp_path, capsys):
    cfg = write_cfg(tmp_path, "solver.json",
                    plant={"A": [[1.0, 0.1], [-0.3, 0.8]], "B": [[0.0], [1e9]]},
                    scenarios={"count": 50, "tau_grid": 3})
    assert main(["design", "-c", cfg]) == EXIT_SOLVER
    assert "solver failure [design]" in capsys.readouterr().err


@pytest.mark.skipif(shutil.which("mpsc") is None, reason="console script not installed")
def test_console_script(tmp_path):
    r = subprocess.run(["mpsc", "confidence", "--ns", "50", "--dims", "1"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and json.loads(r.stdout)["n_s"] == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "mpsc.harness.cli", "--help"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and "simulate" in r.stdout


def test_outputs_byte_identical(tmp_path, cfg_path):
    cfg = write_cfg(tmp_path, "short.json", steps=60, boundary_samples=8)
    for run in ("a", "b"):
        assert main(["design", "-c", cfg, "-o", str(tmp_path / run / "design.json")]) == 0
        assert main(["simulate", "-c", cfg, "-d", str(tmp_path / run / "design.json"),
                     "-o", str(tmp_path / run / "sim")]) == 0
    for name in ("design.json", "sim/trace.csv", "sim/summary.json", "sim/sets.json",
                 "sim/baseline.csv", "sim/phase.svg", "sim/inputs.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
