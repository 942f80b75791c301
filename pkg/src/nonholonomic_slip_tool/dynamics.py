"""
Dynamics of the Full and Reduced Models

Right-hand sides for the strongly damped (full) system, the ideal
nonholonomic (zeroth-order) system and the slip-corrected first-order system,
a fixed-step RK4 integrator, and energy diagnostics.
"""

import logging
import math
from functools import partial
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.linalg import cho_solve

from .constraints import friction_operator, local_projections
from .exceptions import InvalidParams, NonFiniteState, StepTooLargeForStiffness
from .geometry import christoffel, factor_metric, gamma_matrix, metric_value, potential_gradient
from .slow_manifold import first_order_terms, slip
from .types import MODEL_SLIP_ORDER, MODELS, STIFFNESS_RATIO, SimPlan, State, SystemDef, Trajectory

logger = logging.getLogger(__name__)

Derivative = Tuple[np.ndarray, np.ndarray]
RightHandSide = Callable[[State], Derivative]


def full_rhs(system: SystemDef, state: State) -> Derivative:
    """dq/dt = v, dv/dt = -Gamma(q,v)v - (dV)^sharp - (1/eps) FR_sharp v."""
    eps = system.epsilon
    if eps <= 0.0:
        raise InvalidParams(f"full model needs epsilon > 0, got {eps}")
    q = np.asarray(state.q, dtype=float)
    v = np.asarray(state.v, dtype=float)
    factor = factor_metric(metric_value(system.metric, q))
    grad_sharp = cho_solve(factor, potential_gradient(system.potential, q))
    gamma = christoffel(system.metric, q)
    FR = friction_operator(system.metric, system.constraints, system.friction, q)
    dv = -gamma_matrix(gamma, v) @ v - grad_sharp - (FR @ v) / eps
    return v.copy(), dv


def zeroth_rhs(system: SystemDef, state: State) -> Derivative:
    """Ideal nonholonomic equations on v_D = P v.

    dq/dt = v_D, dv/dt = -Gamma(q,v_D)v_D - (nabla_v_D P-perp)(v_D) - P (dV)^sharp
    """
    q = np.asarray(state.q, dtype=float)
    local = local_projections(system, q)
    u = local.pair.P @ np.asarray(state.v, dtype=float)
    dv = (
        -gamma_matrix(local.gamma, u) @ u
        - local.cov_perp(u, u)
        - local.pair.P @ local.grad_sharp
    )
    return u, dv


def first_rhs(system: SystemDef, state: State) -> Derivative:
    """Zeroth-order dynamics plus the eps h1 slip corrections.

    dq/dt = v_D + eps h1(v_D)
    dv/dt = zeroth - eps[Gamma(v_D)h1 + Gamma(h1)v_D] + eps nabla^H_v_D h1(v_D)
            - eps[(nabla_v_D P-perp)(h1) + (nabla_h1 P-perp)(v_D)]
            + eps D^V h1[(nabla_v_D P)(v_D) - P (dV)^sharp]
    """
    q = np.asarray(state.q, dtype=float)
    eps = system.epsilon
    terms = first_order_terms(system, q, state.v)
    local, u, h1_value = terms.local, terms.u, terms.h1
    pair, gamma = local.pair, local.gamma

    zeroth = -gamma_matrix(gamma, u) @ u - local.cov_perp(u, u) - pair.P @ local.grad_sharp
    correction = (
        -(gamma_matrix(gamma, u) @ h1_value + gamma_matrix(gamma, h1_value) @ u)
        + terms.horizontal
        - (local.cov_perp(u, h1_value) + local.cov_perp(h1_value, u))
        + terms.vertical_jacobian @ (local.cov_p(u, u) - pair.P @ local.grad_sharp)
    )
    return u + eps * h1_value, zeroth + eps * correction


_MODEL_RHS = {
    "full": full_rhs,
    "zeroth": zeroth_rhs,
    "first": first_rhs,
}


def model_rhs(system: SystemDef, model: str) -> RightHandSide:
    if model not in _MODEL_RHS:
        raise InvalidParams(f"unknown model {model!r}; expected one of {', '.join(MODELS)}")
    return partial(_MODEL_RHS[model], system)


def check_plan(plan: SimPlan) -> None:
    """Reject invalid plans before any work is done.

    Raises:
        InvalidParams: Non-positive dt, negative horizon, unknown model
        StepTooLargeForStiffness: Full model with dt > epsilon / 20
    """
    if plan.model not in MODELS:
        raise InvalidParams(f"unknown model {plan.model!r}")
    if not plan.dt > 0.0:
        raise InvalidParams(f"dt must be positive, got {plan.dt}")
    if plan.t_final < 0.0:
        raise InvalidParams(f"t_final must be non-negative, got {plan.t_final}")
    if plan.record_every < 1:
        raise InvalidParams(f"record_every must be >= 1, got {plan.record_every}")
    if plan.model == "full":
        limit = plan.epsilon / STIFFNESS_RATIO
        if plan.dt > limit * (1.0 + 1e-12):
            raise StepTooLargeForStiffness(
                f"dt={plan.dt:.6g} exceeds epsilon/{STIFFNESS_RATIO:g}={limit:.6g}"
            )


def _rk4_step(rhs: RightHandSide, t: float, q: np.ndarray, v: np.ndarray, h: float) -> Derivative:
    k1q, k1v = rhs(State(t, q, v))
    k2q, k2v = rhs(State(t + 0.5 * h, q + 0.5 * h * k1q, v + 0.5 * h * k1v))
    k3q, k3v = rhs(State(t + 0.5 * h, q + 0.5 * h * k2q, v + 0.5 * h * k2v))
    k4q, k4v = rhs(State(t + h, q + h * k3q, v + h * k3v))
    q_next = q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    v_next = v + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return q_next, v_next


def integrate(rhs: RightHandSide, state0: State, plan: SimPlan) -> Trajectory:
    """Classical explicit RK4 with a fixed step.

    Takes N = ceil(t_final / dt) equal steps of t_final / N so the last sample
    lands on t_final; records every ``record_every`` steps and the final state.

    Raises:
        StepTooLargeForStiffness: Full model with dt > epsilon / 20
        NonFiniteState: If the state overflows
    """
    check_plan(plan)
    n_steps = math.ceil(plan.t_final / plan.dt - 1e-9) if plan.t_final > 0.0 else 0
    h = plan.t_final / n_steps if n_steps else 0.0
    logger.info("integrating %s model: %d steps of %.4g s", plan.model, n_steps, h)

    t0 = float(state0.t)
    q = np.array(state0.q, dtype=float)
    v = np.array(state0.v, dtype=float)
    times, qs, vs = [t0], [q.copy()], [v.copy()]

    for step in range(1, n_steps + 1):
        q, v = _rk4_step(rhs, t0 + (step - 1) * h, q, v, h)
        t = t0 + step * h
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
            raise NonFiniteState(f"non-finite state at t={t:.6g}")
        if step % plan.record_every == 0 or step == n_steps:
            times.append(t)
            qs.append(q.copy())
            vs.append(v.copy())

    return Trajectory(times=np.array(times), q=np.array(qs), v=np.array(vs))


def initial_state(
    system: SystemDef,
    q0: np.ndarray,
    vD: np.ndarray,
    model: str,
    slip_order: Optional[int] = None,
    t0: float = 0.0,
) -> State:
    """State on the order-k manifold model, k capped by what the model carries."""
    cap = MODEL_SLIP_ORDER[model]
    order = cap if slip_order is None else min(slip_order, cap)
    q0 = np.asarray(q0, dtype=float)
    u = local_projections(system, q0).pair.P @ np.asarray(vD, dtype=float)
    return State(t=t0, q=q0, v=u + slip(system, q0, u, order))


def simulate(system: SystemDef, state0: State, plan: SimPlan) -> Trajectory:
    """Integrate ``plan.model`` for the system at ``plan.epsilon``."""
    if plan.epsilon != system.epsilon:
        system = system.with_epsilon(plan.epsilon)
    return integrate(model_rhs(system, plan.model), state0, plan)


def kinetic_energy(system: SystemDef, q: np.ndarray, v: np.ndarray) -> float:
    """1/2 G(v, v)."""
    v = np.asarray(v, dtype=float)
    return 0.5 * float(v @ metric_value(system.metric, q) @ v)


def total_energy(system: SystemDef, q: np.ndarray, v: np.ndarray) -> float:
    """Kinetic plus potential energy; conserved by the zeroth model."""
    q = np.asarray(q, dtype=float)
    return kinetic_energy(system, q, v) + float(system.potential.value_at(q))


def dissipation_rate(system: SystemDef, q: np.ndarray, v: np.ndarray) -> float:
    """-(1/eps) v^T G FR_sharp v, never positive."""
    v = np.asarray(v, dtype=float)
    G = metric_value(system.metric, q)
    FR = friction_operator(system.metric, system.constraints, system.friction, q)
    return -float(v @ G @ FR @ v) / system.epsilon


def energy_rate(system: SystemDef, q: np.ndarray, v: np.ndarray) -> float:
    """dKE/dt along the full model: dissipation_rate - dV . v."""
    v = np.asarray(v, dtype=float)
    return dissipation_rate(system, q, v) - float(potential_gradient(system.potential, q) @ v)
