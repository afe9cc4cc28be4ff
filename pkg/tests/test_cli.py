import json
from pathlib import Path

import pytest

from obstaclelab.cli import main

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def report(out):
    return json.loads((Path(out) / "report.json").read_text())


def test_validate_passes_on_defaults(tmp_path, capsys):
    assert main(["validate", "--out", str(tmp_path)]) == 0
    r = report(tmp_path)
    assert r["passed"] and r["schema_version"] == "1.0"
    assert "PASS: validate" in capsys.readouterr().out
    assert (tmp_path / "validate.csv").exists()


def test_monotonicity_on_stationary_config_passes(tmp_path):
    assert main(["monotonicity", "--config", str(CONFIGS / "stationary_1d.cfg"), "--out", str(tmp_path), "-q"]) == 0
    scans = report(tmp_path)["results"]["scans"]
    assert scans and all(v == 0.0 for s in scans for v in s["phi_e"])
    assert (tmp_path / "phi_profiles.png").stat().st_size > 0


def test_forced_newton_failure_exits_nonzero_with_trace(tmp_path):
    args = ["solve", "--out", str(tmp_path), "--set", "grid.tau=0.1", "--set", "grid.horizon=0.2",
            "--set", "solver.newton_max_iter=1", "--set", "penalty.eps=1e-6", "--set", "solver.mollify=false"]
    assert main(args) == 2
    err = json.loads((tmp_path / "error.json").read_text())
    assert err["type"] == "SolverError" and err["trace"] and err["residual"] > 0


def test_configuration_error_exits_2(tmp_path, capsys):
    assert main(["solve", "--out", str(tmp_path), "--set", "grid.h=0.3"]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_bad_set_syntax(tmp_path):
    assert main(["solve", "--out", str(tmp_path), "--set", "nokey"]) == 2


def test_solve_writes_csv_and_figures(tmp_path):
    args = ["solve", "--out", str(tmp_path), "--set", "grid.horizon=0.02", "--set", "grid.h=0.02",
            "--set", "grid.tau=4e-4", "-q"]
    assert main(args) == 0
    for f in ("levels.csv", "free_boundary_counts.csv", "zero_set.csv", "snapshots.png", "classification.png"):
        assert (tmp_path / f).exists()
    assert sorted(report(tmp_path)["files"]) == report(tmp_path)["files"]


def test_convergence_two_phase_config(tmp_path):
    assert main(["convergence", "--config", str(CONFIGS / "convergence_two_phase.cfg"), "--out", str(tmp_path), "-q"]) == 0


@pytest.mark.parametrize("cmd", ["solve", "monotonicity"])
def test_csv_outputs_are_byte_identical(tmp_path, cmd):
    extra = ["--config", str(CONFIGS / "stationary_1d.cfg")] if cmd == "monotonicity" else [
        "--set", "grid.horizon=0.02", "--set", "grid.h=0.02", "--set", "grid.tau=4e-4"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([cmd, "--out", str(a), "-q", *extra]) == 0
    assert main([cmd, "--out", str(b), "-q", *extra]) == 0
    csvs = sorted(p.name for p in a.glob("*.csv"))
    assert csvs
    for name in csvs:
        assert (a / name).read_bytes() == (b / name).read_bytes()
