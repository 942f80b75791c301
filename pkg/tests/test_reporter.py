import json
from pathlib import Path

import numpy as np
import pytest

from nonholonomic_slip_tool.dynamics import initial_state, integrate, model_rhs
from nonholonomic_slip_tool.reporter import (
    format_number,
    report_path_for,
    slip_csv,
    trajectory_header,
    write_convergence_csv,
    write_json_report,
    write_text_atomic,
    write_trajectory_csv,
)
from nonholonomic_slip_tool.slow_manifold import h1, h2, slip
from nonholonomic_slip_tool.types import ConvergencePoint, RunReport, SimPlan


def test_numbers_round_trip():
    for value in (0.1, 1.0 / 3.0, -2.5e-17, 6.02214076e23, 0.0):
        assert float(format_number(value)) == value
    assert format_number(0.5) == "0.5"


def test_trajectory_header(disk):
    assert trajectory_header(disk) == [
        "t", "theta", "x", "y", "phi", "v_theta", "v_x", "v_y", "v_phi", "ke", "slip_norm"
    ]


def test_trajectory_csv(disk, tmp_path):
    vD = disk.oracle.constrained_velocity(0.0, 1.0, 1.0)
    plan = SimPlan(model="zeroth", dt=0.01, t_final=0.05, epsilon=0.1)
    trajectory = integrate(model_rhs(disk, "zeroth"), initial_state(disk, np.zeros(4), vD, "zeroth"), plan)
    path = write_trajectory_csv(disk, trajectory, tmp_path / "out" / "traj.csv")

    lines = path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == ",".join(trajectory_header(disk))
    assert len(lines) == 1 + len(trajectory)
    first = [float(x) for x in lines[1].split(",")]
    assert first[:9] == [0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0]
    assert first[9] == pytest.approx(1.25)
    assert first[10] == pytest.approx(0.0, abs=1e-12)
    assert [p.name for p in path.parent.iterdir()] == ["traj.csv"]


def test_convergence_csv_leaves_failed_errors_empty(tmp_path):
    points = [
        ConvergencePoint(epsilon=0.02, order="0", error=0.125),
        ConvergencePoint(epsilon=0.01, order="1", error_message="NonFiniteState: boom"),
    ]
    text = write_convergence_csv(points, tmp_path / "sweep.csv").read_text(encoding="utf-8")
    assert text == "epsilon,order,error\n0.02,0,0.125\n0.01,1,\n"


def test_slip_row_matches_library_values(disk):
    q = np.array([np.pi / 2, 0.0, 0.0, 0.0])
    vD = disk.oracle.constrained_velocity(np.pi / 2, 2.0, 3.0)
    header, row = slip_csv(disk, q, vD).splitlines()
    names = header.split(",")
    values = [float(x) for x in row.split(",")]
    assert names[:4] == ["h1_theta", "h1_x", "h1_y", "h1_phi"]
    assert names[-1] == "slip_phi"
    expected = np.concatenate([h1(disk, q, vD), h2(disk, q, vD), slip(disk, q, vD, 2)])
    assert values == expected.tolist()


def test_json_report_lists_itself(tmp_path):
    report = RunReport(command="simulate", config_digest="abc", outputs=["traj.csv"])
    report.summary = {"final": np.array([1.0, 2.0]), "samples": np.int64(3)}
    path = write_json_report(report, tmp_path / "traj.report.json")
    data = json.loads(path.read_text(encoding="utf-8"))
    assert data["outputs"] == ["traj.csv", str(path)]
    assert data["summary"] == {"final": [1.0, 2.0], "samples": 3}
    assert data["passed"] is True


def test_report_path_for():
    assert report_path_for(Path("runs/sweep.csv")) == Path("runs/sweep.report.json")


def test_atomic_write_replaces_existing_file(tmp_path):
    path = tmp_path / "file.txt"
    path.write_text("old", encoding="utf-8")
    write_text_atomic(path, "new")
    assert path.read_text(encoding="utf-8") == "new"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["file.txt"]
