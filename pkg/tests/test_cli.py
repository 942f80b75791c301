import json
import sys
from pathlib import Path

import pytest
from typer.testing import CliRunner

from nonholonomic_slip_tool import __version__
from nonholonomic_slip_tool.cli import app, main
from nonholonomic_slip_tool.types import InvariantResult

runner = CliRunner()

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"


def _rows(path):
    lines = path.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    return [dict(zip(header, map(float, line.split(",")))) for line in lines[1:]]


def test_simulate_traces_the_circle(tmp_path):
    out = tmp_path / "circle.csv"
    result = runner.invoke(app, ["simulate", "--config", str(CONFIG_DIR / "disk_circle.yaml"), "--out", str(out)])
    assert result.exit_code == 0, result.output
    final = _rows(out)[-1]
    assert final["t"] == pytest.approx(3.141592653589793)
    assert final["x"] == pytest.approx(0.0, abs=1e-6)
    assert final["y"] == pytest.approx(2.0, abs=1e-6)

    report = json.loads((tmp_path / "circle.report.json").read_text(encoding="utf-8"))
    assert report["command"] == "simulate"
    assert report["outputs"] == [str(out), str(tmp_path / "circle.report.json")]
    assert len(report["config_digest"]) == 64


def test_simulate_zero_horizon(tmp_path, disk_tree, write_config):
    disk_tree["sim"]["t_final"] = 0.0
    out = tmp_path / "single.csv"
    result = runner.invoke(app, ["simulate", "--config", str(write_config(disk_tree)), "--out", str(out)])
    assert result.exit_code == 0, result.output
    rows = _rows(out)
    assert len(rows) == 1
    assert rows[0]["v_theta"] == 1.0


def test_simulate_stiffness_guard(tmp_path, disk_tree, write_config):
    disk_tree["sim"] = {"model": "full", "dt": 0.01, "epsilon": 0.1}
    out = tmp_path / "stiff.csv"
    result = runner.invoke(app, ["simulate", "--config", str(write_config(disk_tree)), "--out", str(out)])
    assert result.exit_code == 2
    assert "StepTooLargeForStiffness" in result.output
    assert not out.exists()
    report = json.loads((tmp_path / "stiff.report.json").read_text(encoding="utf-8"))
    assert report["errors"][0].startswith("StepTooLargeForStiffness")
    assert report["passed"] is False


def test_slip_row(disk_tree, write_config):
    config = str(write_config(disk_tree))
    result = runner.invoke(
        app, ["slip", "--config", config, "--theta", "1.5707963267948966", "--v-theta", "2", "--v-phi", "3"]
    )
    assert result.exit_code == 0, result.output
    header, row = result.output.strip().splitlines()
    values = dict(zip(header.split(","), map(float, row.split(","))))
    assert values["h1_x"] == pytest.approx(6.0)
    assert values["h1_y"] == pytest.approx(0.0, abs=1e-12)
    assert values["slip_x"] == pytest.approx(0.1 * values["h1_x"] + 0.01 * values["h2_x"])


def test_slip_defaults_come_from_the_initial_section(disk_tree, write_config):
    result = runner.invoke(app, ["slip", "--config", str(write_config(disk_tree))])
    assert result.exit_code == 0, result.output
    header, row = result.output.strip().splitlines()
    values = dict(zip(header.split(","), map(float, row.split(","))))
    assert [values[f"h2_{name}"] for name in ("theta", "x", "y", "phi")] == pytest.approx(
        [0.0, -1.0 / 9.0, 0.0, 2.0 / 9.0]
    )


def test_slip_without_turning_is_zero(disk_tree, write_config):
    result = runner.invoke(app, ["slip", "--config", str(write_config(disk_tree)), "--v-theta", "0"])
    assert result.exit_code == 0, result.output
    row = result.output.strip().splitlines()[1]
    assert all(float(x) == 0.0 for x in row.split(","))


def test_convergence_self_comparison(tmp_path, disk_tree, write_config):
    disk_tree["sim"] = {"t_final": 0.05}
    disk_tree["sweep"] = {"epsilons": [0.04, 0.02, 0.01], "orders": ["full"], "skip_over_epsilon": 1}
    out = tmp_path / "sweep.csv"
    result = runner.invoke(
        app, ["convergence", "--config", str(write_config(disk_tree)), "--out", str(out), "--jobs", "2"]
    )
    assert result.exit_code == 0, result.output
    assert out.read_text(encoding="utf-8").splitlines() == [
        "epsilon,order,error",
        "0.040000000000000001,full,0",
        "0.02,full,0",
        "0.01,full,0",
    ]
    report = json.loads((tmp_path / "sweep.report.json").read_text(encoding="utf-8"))
    assert report["summary"]["epsilons"] == [0.04, 0.02, 0.01]
    assert report["flags"] == {"slope_order_full": True}


def test_convergence_with_failed_points(tmp_path, disk_tree, write_config):
    disk_tree["sim"] = {"t_final": 0.05}
    disk_tree["sweep"] = {"epsilons": [0.04, 0.02, 0.01], "dt_over_epsilon": 0.1}
    out = tmp_path / "sweep.csv"
    result = runner.invoke(app, ["convergence", "--config", str(write_config(disk_tree)), "--out", str(out)])
    assert result.exit_code == 2
    report = json.loads((tmp_path / "sweep.report.json").read_text(encoding="utf-8"))
    assert len(report["errors"]) == 6


def test_convergence_needs_three_epsilons(tmp_path, disk_tree, write_config):
    disk_tree["sweep"] = {"epsilons": [0.02, 0.01]}
    result = runner.invoke(
        app, ["convergence", "--config", str(write_config(disk_tree)), "--out", str(tmp_path / "s.csv")]
    )
    assert result.exit_code == 2
    assert "InvalidParams" in result.output


@pytest.mark.slow
def test_validate_fault_injection_names_the_first_invariant(disk_tree, write_config):
    result = runner.invoke(
        app,
        ["validate", "--config", str(write_config(disk_tree)), "--samples", "2", "--fault", "flip-projection-sign"],
    )
    assert result.exit_code == 2
    assert "projection idempotence" in result.output


def test_validate_rejects_zero_mass(disk_tree, write_config):
    disk_tree["system"]["params"]["m"] = 0.0
    result = runner.invoke(app, ["validate", "--config", str(write_config(disk_tree))])
    assert result.exit_code == 2
    assert "InvalidParams" in result.output


@pytest.mark.slow
def test_validate_passes_on_the_disk(tmp_path):
    out = tmp_path / "validate.json"
    result = runner.invoke(
        app, ["validate", "--config", str(CONFIG_DIR / "disk.yaml"), "--samples", "10", "--out", str(out)]
    )
    assert result.exit_code == 0, result.output
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["passed"] is True
    assert report["summary"]["seed"] == 0
    assert all(item["passed"] for item in report["summary"]["invariants"])


def test_missing_config_is_a_usage_error(tmp_path):
    result = runner.invoke(app, ["simulate", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "x.csv")])
    assert result.exit_code == 1


def test_schema_error_exits_with_failure(disk_tree, write_config, tmp_path):
    disk_tree["sim"]["bogus"] = 1
    result = runner.invoke(
        app, ["simulate", "--config", str(write_config(disk_tree)), "--out", str(tmp_path / "x.csv")]
    )
    assert result.exit_code == 2
    assert "SchemaError" in result.output


def test_version():
    result = runner.invoke(app, ["version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_main_maps_usage_errors_to_one(monkeypatch):
    monkeypatch.setattr(sys, "argv", ["slip-eval", "simulate", "--no-such-flag"])
    with pytest.raises(SystemExit) as excinfo:
        main()
    assert excinfo.value.code == 1


def test_main_passes_domain_failures_through(monkeypatch, disk_tree, write_config, tmp_path):
    disk_tree["system"]["params"]["m"] = -1.0
    monkeypatch.setattr(sys, "argv", ["slip-eval", "slip", "--config", str(write_config(disk_tree))])
    with pytest.raises(SystemExit) as excinfo:
        main()
    assert excinfo.value.code == 2


def test_validate_reports_the_first_failing_invariant(monkeypatch, disk_tree, write_config, tmp_path):
    results = [
        InvariantResult("projection idempotence", "constraints", 1e-16, 1e-10),
        InvariantResult("section consistency", "geometry", 3e-4, 1e-6),
        InvariantResult("chain-rule consistency", "geometry", 1.0, 1e-8),
    ]
    monkeypatch.setattr("nonholonomic_slip_tool.cli.run_validation", lambda system, **kwargs: results)
    out = tmp_path / "validate.json"
    result = runner.invoke(app, ["validate", "--config", str(write_config(disk_tree)), "--out", str(out)])
    assert result.exit_code == 2
    assert "section consistency: defect 3.000e-04 exceeds tolerance 1.0e-06" in result.output
    report = json.loads(out.read_text(encoding="utf-8"))
    assert report["flags"] == {
        "projection idempotence": True,
        "section consistency": False,
        "chain-rule consistency": False,
    }
