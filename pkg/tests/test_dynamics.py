import numpy as np
import pytest
from numpy.testing import assert_allclose

from nonholonomic_slip_tool.dynamics import (
    dissipation_rate,
    energy_rate,
    first_rhs,
    full_rhs,
    initial_state,
    integrate,
    kinetic_energy,
    model_rhs,
    simulate,
    total_energy,
    zeroth_rhs,
)
from nonholonomic_slip_tool.exceptions import (
    InvalidParams,
    NonFiniteState,
    StepTooLargeForStiffness,
)
from nonholonomic_slip_tool.constraints import perp_projector
from nonholonomic_slip_tool.types import SimPlan, State
from nonholonomic_slip_tool.utils import partial_derivatives
from nonholonomic_slip_tool.validation import energy_balance_defect


def _unit_rolling(disk, theta=0.0):
    return disk.oracle.constrained_velocity(theta, 1.0, 1.0)


def test_full_model_friction_response(disk):
    dq, dv = full_rhs(disk, State(0.0, np.zeros(4), np.array([0.0, 1.0, 0.0, 0.0])))
    assert_allclose(dq, [0.0, 1.0, 0.0, 0.0])
    assert_allclose(dv, [0.0, -10.0, 0.0, 20.0], atol=1e-12)


def test_full_model_requires_positive_epsilon(disk):
    with pytest.raises(InvalidParams):
        full_rhs(disk.with_epsilon(0.0), State(0.0, np.zeros(4), np.zeros(4)))


def test_zeroth_model_turning_acceleration(disk):
    q = np.array([np.pi / 2, 0.0, 0.0, 0.0])
    vD = disk.oracle.constrained_velocity(np.pi / 2, 2.0, 3.0)
    dq, dv = zeroth_rhs(disk, State(0.0, q, vD))
    assert_allclose(dq, vD, atol=1e-14)
    assert_allclose(dv, [0.0, -6.0, 0.0, 0.0], atol=1e-12)


def test_first_model_at_zero_heading(disk):
    dq, dv = first_rhs(disk, State(0.0, np.zeros(4), _unit_rolling(disk)))
    assert_allclose(dq, [1.0, 1.0, -0.1, 1.0], atol=1e-12)
    assert_allclose(dv, [0.0, 1.0 / 30.0, 1.0, -1.0 / 15.0], atol=1e-12)


def test_reduced_models_match_closed_forms(disk):
    rng = np.random.default_rng(2)
    for _ in range(10):
        q = np.array([rng.uniform(0, 2 * np.pi), *rng.uniform(-5, 5, 2), 0.0])
        vD = disk.oracle.constrained_velocity(q[0], *rng.uniform(-2, 2, 2))
        state = State(0.0, q, vD)
        assert_allclose(zeroth_rhs(disk, state)[1], disk.oracle.zeroth_acceleration(q, vD), atol=1e-10)
        dq, dv = first_rhs(disk, state)
        assert_allclose(dq, disk.oracle.first_velocity(q, vD), atol=1e-10)
        assert_allclose(dv, disk.oracle.first_acceleration(q, vD), atol=1e-9)


def test_energy_diagnostics(disk):
    vD = _unit_rolling(disk)
    assert kinetic_energy(disk, np.zeros(4), vD) == pytest.approx(1.25)
    v = np.array([0.0, 1.0, 0.0, 0.0])
    assert dissipation_rate(disk, np.zeros(4), v) == pytest.approx(-10.0)
    assert energy_rate(disk, np.zeros(4), v) == pytest.approx(-10.0)
    assert dissipation_rate(disk, np.zeros(4), vD) == pytest.approx(0.0, abs=1e-12)


def test_integrator_lands_on_the_horizon(disk):
    plan = SimPlan(model="zeroth", dt=0.03, t_final=0.1, epsilon=0.1, record_every=2)
    trajectory = integrate(model_rhs(disk, "zeroth"), State(0.0, np.zeros(4), _unit_rolling(disk)), plan)
    # four steps of 0.025: samples at 0, 0.05, 0.1
    assert_allclose(trajectory.times, [0.0, 0.05, 0.1], atol=1e-15)
    assert trajectory.final.t == pytest.approx(0.1)


def test_zero_horizon_records_only_the_initial_state(disk):
    plan = SimPlan(model="zeroth", dt=0.01, t_final=0.0, epsilon=0.1)
    state0 = State(0.0, np.zeros(4), _unit_rolling(disk))
    trajectory = integrate(model_rhs(disk, "zeroth"), state0, plan)
    assert len(trajectory) == 1
    assert_allclose(trajectory.state(0).v, state0.v)


def test_stiffness_guard(disk):
    plan = SimPlan(model="full", dt=0.1 / 20 * 1.01, t_final=0.1, epsilon=0.1)
    with pytest.raises(StepTooLargeForStiffness):
        integrate(model_rhs(disk, "full"), State(0.0, np.zeros(4), np.zeros(4)), plan)
    integrate(model_rhs(disk, "full"), State(0.0, np.zeros(4), np.zeros(4)), SimPlan("full", 0.005, 0.01, 0.1))


@pytest.mark.parametrize(
    "plan",
    [
        SimPlan(model="zeroth", dt=0.0, t_final=1.0, epsilon=0.1),
        SimPlan(model="zeroth", dt=0.1, t_final=-1.0, epsilon=0.1),
        SimPlan(model="sideways", dt=0.1, t_final=1.0, epsilon=0.1),
        SimPlan(model="zeroth", dt=0.1, t_final=1.0, epsilon=0.1, record_every=0),
    ],
)
def test_invalid_plans(disk, plan):
    with pytest.raises(InvalidParams):
        integrate(lambda state: (state.v, np.zeros(4)), State(0.0, np.zeros(4), np.zeros(4)), plan)


def test_diverging_state_is_reported():
    plan = SimPlan(model="zeroth", dt=0.5, t_final=100.0, epsilon=0.1)
    with pytest.raises(NonFiniteState):
        integrate(lambda state: (state.v, state.v**3), State(0.0, np.zeros(1), np.ones(1)), plan)


def test_initial_state_caps_slip_order(disk):
    vD = _unit_rolling(disk)
    assert_allclose(initial_state(disk, np.zeros(4), vD, "zeroth", 2).v, vD)
    assert_allclose(initial_state(disk, np.zeros(4), vD, "first").v, vD + [0.0, 0.0, -0.1, 0.0], atol=1e-12)
    assert_allclose(
        initial_state(disk, np.zeros(4), vD, "full").v,
        vD + [0.0, -1.0 / 900.0, -0.1, 2.0 / 900.0],
        atol=1e-12,
    )
    assert_allclose(initial_state(disk, np.zeros(4), vD, "full", 1).v, vD + [0.0, 0.0, -0.1, 0.0], atol=1e-12)


def test_zeroth_model_traces_a_circle(disk):
    plan = SimPlan(model="zeroth", dt=1e-3, t_final=np.pi, epsilon=0.1, record_every=100)
    trajectory = integrate(model_rhs(disk, "zeroth"), State(0.0, np.zeros(4), _unit_rolling(disk)), plan)
    assert_allclose(trajectory.q[:, 1], np.sin(trajectory.times), atol=1e-6)
    assert_allclose(trajectory.q[:, 2], 1.0 - np.cos(trajectory.times), atol=1e-6)
    assert trajectory.final.q[2] == pytest.approx(2.0, abs=1e-6)
    energies = [kinetic_energy(disk, s.q, s.v) for s in trajectory]
    assert_allclose(energies, 1.25, atol=1e-8)


def test_full_model_dissipates_and_keeps_heading_rate(disk):
    eps = 0.02
    system = disk.with_epsilon(eps)
    state0 = initial_state(system, np.zeros(4), _unit_rolling(system), "full")
    trajectory = simulate(system, state0, SimPlan("full", eps / 50, 0.2, eps))
    energies = np.array([kinetic_energy(system, s.q, s.v) for s in trajectory])
    assert np.all(np.diff(energies) <= 1e-9)
    assert_allclose(trajectory.v[:, 0], 1.0, atol=1e-10)


def test_full_model_attracts_pure_slip(disk):
    eps = 0.01
    system = disk.with_epsilon(eps)
    q0 = np.array([0.4, 0.0, 0.0, 0.0])
    v0 = perp_projector(system.metric, system.constraints, q0) @ np.array([0.0, 1.0, -0.5, 0.3])
    trajectory = simulate(system, State(0.0, q0, v0), SimPlan("full", eps / 50, 20 * eps, eps))
    final = trajectory.final
    residual = perp_projector(system.metric, system.constraints, final.q) @ final.v
    assert np.linalg.norm(residual) < 1e-6


def test_simulate_switches_epsilon(disk):
    state0 = State(0.0, np.zeros(4), np.array([0.0, 1.0, 0.0, 0.0]))
    strong = simulate(disk, state0, SimPlan("full", 0.001, 0.001, 0.02))
    weak = simulate(disk, state0, SimPlan("full", 0.001, 0.001, 0.1))
    assert strong.final.v[1] < weak.final.v[1] < 1.0


def _ramp_states():
    return [
        (np.array([1.5, 0.2, 0.1]), np.array([0.4, 1.0, 0.0])),
        (np.array([1.1, -0.7, 2.0]), np.array([-0.3, 0.5, 0.2])),
        (np.array([1.9, 2.5, -1.0]), np.array([1.0, -0.2, 0.7])),
    ]


def _on_ramp(system, q, v):
    return v - perp_projector(system.metric, system.constraints, q) @ v


def test_total_energy_adds_the_potential(polar_gravity):
    q, v = np.array([1.5, 0.2, 2.0]), np.array([1.0, 1.0, 0.0])
    assert total_energy(polar_gravity, q, v) == pytest.approx(0.5 * (1.0 + 2.25) + 9.81 * 2.0)


def test_energy_rate_under_gravity(polar_gravity):
    for q, v in _ramp_states():
        expected = dissipation_rate(polar_gravity, q, v) - 9.81 * v[2]
        assert energy_rate(polar_gravity, q, v) == pytest.approx(expected, rel=1e-9, abs=1e-9)


def test_total_energy_drops_at_the_dissipation_rate(polar_gravity):
    for q, v in _ramp_states():
        dq, dv = full_rhs(polar_gravity, State(0.0, q, v))
        rate = partial_derivatives(
            lambda s: total_energy(polar_gravity, q + s[0] * dq, v + s[0] * dv), np.zeros(1), 1e-5
        )[0]
        assert rate == pytest.approx(dissipation_rate(polar_gravity, q, v), rel=1e-6, abs=1e-6)
        assert energy_balance_defect(polar_gravity, q, v) <= 1e-6


def test_zeroth_model_stays_tangent_under_gravity(polar_gravity):
    for q, v in _ramp_states():
        vD = _on_ramp(polar_gravity, q, v)
        dq, dv = zeroth_rhs(polar_gravity, State(0.0, q, vD))
        # A = [0, -r, 1], so d/dt (A v) = -dr v^alpha + A dv
        A = np.array([0.0, -q[0], 1.0])
        assert abs(-dq[0] * vD[1] + A @ dv) <= 1e-8
        assert dv[2] != pytest.approx(0.0)


def test_zeroth_model_conserves_total_energy_under_gravity(polar_gravity):
    q0 = np.array([1.5, 0.2, 0.1])
    vD0 = _on_ramp(polar_gravity, q0, np.array([0.4, 1.0, 0.0]))
    plan = SimPlan(model="zeroth", dt=1e-3, t_final=0.5, epsilon=0.1)
    trajectory = integrate(model_rhs(polar_gravity, "zeroth"), initial_state(polar_gravity, q0, vD0, "zeroth"), plan)
    energies = np.array([total_energy(polar_gravity, s.q, s.v) for s in trajectory])
    assert_allclose(energies, energies[0], atol=1e-7)
    assert max(abs(s.q[1] - q0[1]) for s in trajectory) > 1e-3
