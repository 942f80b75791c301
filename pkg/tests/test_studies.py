import pytest

from nonholonomic_slip_tool.config import RunConfig
from nonholonomic_slip_tool.exceptions import InvalidParams, StepTooLargeForStiffness
from nonholonomic_slip_tool.studies import (
    batch_compute_convergence,
    compute_convergence_point,
    get_convergence_summary,
    run_simulation,
    sweep_plan,
)


def _sweep_config(disk_tree, **sweep):
    disk_tree["sim"] = {"t_final": 0.05}
    disk_tree["sweep"] = {"epsilons": [0.04, 0.02, 0.01], "orders": [0, 1], **sweep}
    return RunConfig.from_dict(disk_tree)


def test_run_simulation(disk_tree):
    trajectory, plan = run_simulation(RunConfig.from_dict(disk_tree))
    assert plan.model == "zeroth"
    assert len(trajectory) == 101
    assert trajectory.final.t == pytest.approx(0.1)
    assert trajectory.v[0, 0] == 1.0


def test_run_simulation_rejects_stiff_steps(disk_tree):
    disk_tree["sim"] = {"model": "full", "dt": 0.01, "epsilon": 0.1}
    with pytest.raises(StepTooLargeForStiffness):
        run_simulation(RunConfig.from_dict(disk_tree))


def test_sweep_plan_scales_with_epsilon(disk_tree):
    plan = sweep_plan(_sweep_config(disk_tree), 0.01)
    assert plan.model == "full"
    assert plan.dt == pytest.approx(0.0002)
    assert plan.transient_skip == pytest.approx(0.1)
    assert plan.t_final == 0.05


def test_self_comparison_has_zero_error(disk_tree):
    config = _sweep_config(disk_tree, orders=["full"], skip_over_epsilon=1)
    (point,) = compute_convergence_point(config, 0.02)
    assert point.order == "full"
    assert point.error == 0.0


def test_reduced_model_errors_shrink_with_epsilon(disk_tree):
    config = _sweep_config(disk_tree, skip_over_epsilon=1)
    points = batch_compute_convergence(config)
    assert [(p.epsilon, p.order) for p in points] == [
        (0.04, "0"), (0.04, "1"), (0.02, "0"), (0.02, "1"), (0.01, "0"), (0.01, "1")
    ]
    zeroth = [p.error for p in points if p.order == "0"]
    assert zeroth[0] > zeroth[1] > zeroth[2] > 0.0
    first = [p.error for p in points if p.order == "1"]
    assert all(f < z for f, z in zip(first, zeroth))


def test_worker_count_does_not_change_results(disk_tree):
    config = _sweep_config(disk_tree, skip_over_epsilon=1)
    serial = batch_compute_convergence(config, jobs=1)
    parallel = batch_compute_convergence(config, jobs=2)
    assert [p.to_dict() for p in serial] == [p.to_dict() for p in parallel]


def test_sweep_needs_three_epsilons(disk_tree):
    config = _sweep_config(disk_tree)
    config.sweep.epsilons = [0.02, 0.01]
    with pytest.raises(InvalidParams):
        batch_compute_convergence(config)


def test_sweep_needs_a_worker(disk_tree):
    with pytest.raises(InvalidParams):
        batch_compute_convergence(_sweep_config(disk_tree), jobs=0)


def test_failed_points_are_recorded(disk_tree):
    config = _sweep_config(disk_tree, dt_over_epsilon=0.1)
    points = batch_compute_convergence(config)
    assert len(points) == 6
    assert all(not p.is_successful for p in points)
    assert points[0].error_message.startswith("StepTooLargeForStiffness")

    summary = get_convergence_summary(points)
    assert summary["failed_points"] == 6
    assert summary["slopes"] == []


def test_failed_points_raise_without_continue(disk_tree):
    config = _sweep_config(disk_tree, dt_over_epsilon=0.1)
    with pytest.raises(StepTooLargeForStiffness):
        batch_compute_convergence(config, continue_on_error=False)


def test_summary_reports_slopes_with_the_grid(disk_tree):
    points = batch_compute_convergence(_sweep_config(disk_tree, skip_over_epsilon=1))
    summary = get_convergence_summary(points)
    assert summary["epsilons"] == [0.04, 0.02, 0.01]
    assert [fit["order"] for fit in summary["slopes"]] == ["0", "1"]
    assert all(fit["epsilons"] == [0.04, 0.02, 0.01] for fit in summary["slopes"])
    assert set(summary["passed"]) == {"0", "1"}


@pytest.mark.slow
def test_convergence_orders_on_the_standard_grid(disk_tree):
    disk_tree["sim"] = {"t_final": 1.0}
    disk_tree["sweep"] = {"epsilons": [0.02, 0.01, 0.005, 0.0025], "orders": [0, 1]}
    summary = get_convergence_summary(batch_compute_convergence(RunConfig.from_dict(disk_tree), jobs=4))
    slopes = {fit["order"]: fit["slope"] for fit in summary["slopes"]}
    assert slopes["0"] == pytest.approx(1.0, abs=0.2)
    assert slopes["1"] == pytest.approx(2.0, abs=0.3)
    assert summary["passed"] == {"0": True, "1": True}
