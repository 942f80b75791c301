"""
Invariant Suites

Every check measures one defect (a max-abs entry, a relative norm or a slope
deviation) over random samples and compares it with a tolerance. The suites
run in a fixed order, so the first failing invariant is reproducible for a
given seed.
"""

import logging
from dataclasses import replace
from typing import Dict, List, Optional

import numpy as np

from .constraints import constraint_matrix, distribution_frame, projections, projector_fields
from .dynamics import (
    dissipation_rate,
    first_rhs,
    full_rhs,
    initial_state,
    integrate,
    model_rhs,
    total_energy,
    zeroth_rhs,
)
from .exceptions import InvalidParams, ValidationFailure
from .geometry import (
    bundle_partials,
    christoffel,
    cov_deriv_tensor,
    cov_deriv_vector,
    gamma_matrix,
    horizontal_cov_deriv,
    metric_partials,
    metric_value,
    potential_gradient,
    tensor_partials,
    vertical_jacobian,
)
from .metrics_calculator import fit_loglog_slope, max_abs, relative_defect
from .slow_manifold import (
    generating_residual,
    h1,
    h2,
    invariance_residual,
    manifold_projection,
    slip,
    slip_section,
)
from .systems import disk_system
from .types import (
    RESIDUAL_SLOPE,
    TOLERANCES,
    BundleMap,
    InvariantResult,
    SimPlan,
    State,
    SystemDef,
    TensorField11,
    VectorField,
)
from .utils.finite_differences import partial_derivatives

logger = logging.getLogger(__name__)

FAULTS = ("flip-projection-sign",)

ANGLE_COORDINATES = ("theta", "phi")
POSITION_RANGE = 5.0
VELOCITY_RANGE = 2.0

RESIDUAL_EPSILONS = (0.04, 0.02, 0.01)
RESIDUAL_STATES = 5
SCALINGS = (-1.0, 0.5, 2.0)
FD_ORACLE_STEP = 1e-4  # nested differences in h2 need a coarser step than the default
FD_ORACLE_SAMPLES = 20
ENERGY_BALANCE_STATES = 20


class Sampler:
    """Deterministic random configurations and D-velocities."""

    def __init__(self, system: SystemDef, seed: int):
        self.system = system
        self.rng = np.random.default_rng(seed)

    def configuration(self) -> np.ndarray:
        q = np.empty(self.system.dim)
        for i, name in enumerate(self.system.coordinate_names()):
            if name in ANGLE_COORDINATES:
                q[i] = self.rng.uniform(0.0, 2.0 * np.pi)
            else:
                q[i] = self.rng.uniform(-POSITION_RANGE, POSITION_RANGE)
        return q

    def d_velocity(self, q: np.ndarray) -> np.ndarray:
        S = distribution_frame(self.system.constraints, q)
        return S @ self.rng.uniform(-VELOCITY_RANGE, VELOCITY_RANGE, S.shape[1])

    def vector(self) -> np.ndarray:
        return self.rng.uniform(-VELOCITY_RANGE, VELOCITY_RANGE, self.system.dim)


def _potential_free(system: SystemDef, q: np.ndarray) -> bool:
    return max_abs(potential_gradient(system.potential, q)) == 0.0


def _result(name: str, suite: str, defect: float, tolerance_key: str, detail: str = "") -> InvariantResult:
    return InvariantResult(
        name=name, suite=suite, defect=float(defect), tolerance=TOLERANCES[tolerance_key], detail=detail
    )


def projection_suite(system: SystemDef, sampler: Sampler, samples: int, fault: Optional[str] = None) -> List[InvariantResult]:
    """Projection algebra, Q-map identity, dissipativity and frame independence."""
    metric, cs, fs = system.metric, system.constraints, system.friction
    n = system.dim
    defects: Dict[str, float] = {
        "projection idempotence": 0.0,
        "projection complementarity": 0.0,
        "constraint annihilation": 0.0,
        "G-self-adjointness": 0.0,
        "friction kernel": 0.0,
        "Q-map identity": 0.0,
        "Q-map kernel": 0.0,
        "friction dissipativity": 0.0,
        "scale equivariance": 0.0,
        "frame independence": 0.0,
    }
    doubled = replace(fs, mu_at=lambda q: 2.0 * np.asarray(fs.mu_at(q)))
    svd_constraints = replace(cs, D_frame_at=None)

    for _ in range(samples):
        q = sampler.configuration()
        pair = projections(metric, cs, fs, q)
        if fault == "flip-projection-sign":
            pair = replace(pair, P=-pair.P)
        P, Pp, FR, Q = pair.P, pair.P_perp, pair.FR_sharp, pair.Q
        G = metric_value(metric, q)
        A = constraint_matrix(cs, q)

        def bump(key: str, value: float) -> None:
            defects[key] = max(defects[key], value)

        bump("projection idempotence", max(max_abs(P @ P - P), max_abs(Pp @ Pp - Pp)))
        bump("projection complementarity", max(max_abs(P @ Pp), max_abs(P + Pp - np.eye(n))))
        bump("constraint annihilation", max_abs(A @ P))
        bump("G-self-adjointness", max_abs(P.T @ G - G @ P))
        bump("friction kernel", max_abs(FR @ P))
        bump("Q-map identity", max_abs(Q @ FR - Pp))
        bump("Q-map kernel", max_abs(Q @ pair.D_frame))

        v = sampler.vector()
        form = float(v @ G @ FR @ v)
        vD = P @ v
        bump("friction dissipativity", max(-form, abs(float(vD @ G @ FR @ vD))))

        scaled = projections(metric, cs, doubled, q)
        bump("scale equivariance", max(max_abs(scaled.FR_sharp - 2.0 * FR), max_abs(2.0 * scaled.Q - Q)))

        free = projections(metric, svd_constraints, fs, q)
        bump("frame independence", max(max_abs(free.P_perp - Pp), max_abs(free.Q - Q)))

    return [_result(name, "constraints", defect, "projection") for name, defect in defects.items()]


def smooth_test_field(dim: int) -> VectorField:
    """Y^i(q) = sin(q^(i+1)) + q^i^2 / 2 (indices cyclic), with its exact Jacobian."""
    shifted = np.roll(np.arange(dim), -1)

    def value_at(q: np.ndarray) -> np.ndarray:
        return np.sin(q[shifted]) + 0.5 * q**2

    def jacobian_at(q: np.ndarray) -> np.ndarray:
        J = np.diag(q.astype(float))
        J[np.arange(dim), shifted] += np.cos(q[shifted])
        return J

    return VectorField(value_at=value_at, jacobian_at=jacobian_at)


def section_consistency_defect(
    system: SystemDef, Y: VectorField, q: np.ndarray, v: np.ndarray
) -> float:
    """|d/ds Y(q + s v) + Gamma(q,v) Y(q) - nabla_v Y| with the derivative along the line by differences."""
    gamma = christoffel(system.metric, q)
    along = partial_derivatives(lambda s: Y.value_at(q + s[0] * v), np.zeros(1), system.metric.fd_step)[0]
    expected = along + gamma_matrix(gamma, v) @ Y.value_at(q)
    return max_abs(cov_deriv_vector(Y, v, q, gamma) - expected)


def chain_rule_defect(
    system: SystemDef, A: TensorField11, Y: VectorField, q: np.ndarray, X: np.ndarray
) -> float:
    """Relative defect of the chain rule for the linear bundle map h(q, w) = A(q) w along w = Y.

    nabla^H_X h + D^V h nabla_X Y must equal (nabla_X A) Y + A nabla_X Y; h is
    differentiated numerically, A through its own partials.
    """
    gamma = christoffel(system.metric, q)
    h = BundleMap(eval=lambda x, w: A.value_at(x) @ w, fd_step=system.metric.fd_step)
    w = Y.value_at(q)
    dY = cov_deriv_vector(Y, X, q, gamma)
    lhs = horizontal_cov_deriv(h, X, q, w, gamma) + vertical_jacobian(h, q, w) @ dY
    rhs = cov_deriv_tensor(A, X, q, gamma) @ w + A.value_at(q) @ dY
    return max_abs(lhs - rhs) / max(1.0, max_abs(rhs))


def geometry_suite(system: SystemDef, sampler: Sampler, samples: int) -> List[InvariantResult]:
    """Christoffel symmetry, metric compatibility, section and chain-rule consistency,
    vertical Jacobian agreement."""
    metric = system.metric
    analytic = metric.partials_at is not None
    Y = smooth_test_field(system.dim)
    _, p_perp = projector_fields(system)
    symmetry = compatibility = section = chain_rule = 0.0
    for _ in range(samples):
        q = sampler.configuration()
        coeffs = christoffel(metric, q).coeffs
        symmetry = max(symmetry, max_abs(coeffs - np.transpose(coeffs, (0, 2, 1))))
        G = metric_value(metric, q)
        dG = metric_partials(metric, q)
        # d_k G_ij = G_lj Gamma^l_ki + G_il Gamma^l_kj
        rhs = np.einsum("lj,lki->kij", G, coeffs) + np.einsum("il,lkj->kij", G, coeffs)
        compatibility = max(compatibility, max_abs(dG - rhs))

        X = sampler.vector()
        section = max(section, section_consistency_defect(system, Y, q, X))
        chain_rule = max(chain_rule, chain_rule_defect(system, p_perp, Y, q, X))

    results = [
        _result("christoffel symmetry", "geometry", symmetry, "christoffel_symmetry"),
        _result(
            "metric compatibility",
            "geometry",
            compatibility,
            "metric_compatibility_analytic" if analytic else "metric_compatibility_fd",
        ),
        _result("section consistency", "geometry", section, "section_consistency"),
        _result("chain-rule consistency", "geometry", chain_rule, "chain_rule"),
    ]

    oracle = system.oracle
    if oracle is not None:
        exact = oracle.h1_map()
        numeric = BundleMap(eval=oracle.h1, fd_step=metric.fd_step)
        agreement = 0.0
        for _ in range(samples):
            q = sampler.configuration()
            w = sampler.vector()
            reference = vertical_jacobian(exact, q, w)
            estimate = vertical_jacobian(numeric, q, w)
            scale = max(1.0, max_abs(reference))
            agreement = max(agreement, max_abs(estimate - reference) / scale)
        results.append(
            _result("vertical jacobian agreement", "geometry", agreement, "vertical_jacobian")
        )
    return results


def oracle_suite(system: SystemDef, sampler: Sampler, samples: int) -> List[InvariantResult]:
    """Generic pipeline against the closed-form reference."""
    oracle = system.oracle
    if oracle is None:
        return []
    metric, cs, fs = system.metric, system.constraints, system.friction
    printed = projections_defect = slip_defect = dynamics_defect = 0.0
    for _ in range(samples):
        q = sampler.configuration()
        theta = q[0]
        pair = projections(metric, cs, fs, q)
        P_ref, Pp_ref = oracle.projection(theta), oracle.perp_projection(theta)
        projections_defect = max(
            projections_defect,
            max_abs(pair.P - P_ref),
            max_abs(pair.P_perp - Pp_ref),
            max_abs(pair.FR_sharp - oracle.friction_matrix(theta)),
        )
        printed = max(
            printed,
            max_abs(P_ref + Pp_ref - np.eye(system.dim)),
            max_abs(P_ref @ P_ref - P_ref),
            max_abs(Pp_ref @ Pp_ref - Pp_ref),
            max_abs(constraint_matrix(cs, q) @ P_ref),
        )
        vD = sampler.d_velocity(q)
        slip_defect = max(
            slip_defect,
            max_abs(h1(system, q, vD) - oracle.h1(q, vD)),
            max_abs(h2(system, q, vD) - oracle.h2(q, vD)),
        )
        state = State(0.0, q, vD)
        dynamics_defect = max(
            dynamics_defect,
            max_abs(zeroth_rhs(system, state)[1] - oracle.zeroth_acceleration(q, vD)),
            max_abs(first_rhs(system, state)[1] - oracle.first_acceleration(q, vD)),
            max_abs(first_rhs(system, state)[0] - oracle.first_velocity(q, vD)),
        )

    fd_system = disk_system(oracle.params, analytic_partials=False, fd_step=FD_ORACLE_STEP)
    fd_defect = 0.0
    for _ in range(min(samples, FD_ORACLE_SAMPLES)):
        q = sampler.configuration()
        vD = sampler.d_velocity(q)
        fd_defect = max(
            fd_defect,
            max_abs(h1(fd_system, q, vD) - oracle.h1(q, vD)),
            max_abs(h2(fd_system, q, vD) - oracle.h2(q, vD)),
        )

    return [
        _result("printed matrices", "systems", printed, "printed_matrices"),
        _result("oracle projections", "systems", projections_defect, "oracle_projection"),
        _result("oracle slip (analytic partials)", "slow_manifold", slip_defect, "oracle_slip_analytic"),
        _result("oracle slip (finite differences)", "slow_manifold", fd_defect, "oracle_slip_fd"),
        _result("oracle reduced dynamics", "dynamics", dynamics_defect, "oracle_slip_analytic"),
    ]


def classical_friction_force(system: SystemDef, q: np.ndarray, v: np.ndarray, h: BundleMap) -> np.ndarray:
    """-(1/eps) FR v from the time derivative of P-perp(v) = h(P v), raw matrix form (V = 0).

    -[sum_k dP-perp/dq^k v^k] v + P-perp Gamma(v) v + [dh/dq] v
      + D^V h [sum_k dP/dq^k v^k] v - D^V h P Gamma(v) v
    """
    metric, cs = system.metric, system.constraints
    _, p_perp = projector_fields(system)
    Pp = p_perp.value_at(q)
    dPp = np.einsum("kij,k->ij", tensor_partials(p_perp, q), v)
    P = np.eye(system.dim) - Pp
    dh_dq, dh_dw = bundle_partials(h, q, P @ v)
    Gv = gamma_matrix(christoffel(metric, q), v) @ v
    return -dPp @ v + Pp @ Gv + dh_dq @ v + dh_dw @ (-dPp) @ v - dh_dw @ P @ Gv


def covariant_friction_force(system: SystemDef, q: np.ndarray, v: np.ndarray, h: BundleMap) -> np.ndarray:
    """-(1/eps) FR v from the covariant form (V = 0).

    -(nabla_v P-perp)(v) + D^V h (nabla_v P)(v) + nabla^H_v h (P v)
    """
    p_field, p_perp = projector_fields(system)
    gamma = christoffel(system.metric, q)
    w = p_field.value_at(q) @ v
    return (
        -cov_deriv_tensor(p_perp, v, q, gamma) @ v
        + vertical_jacobian(h, q, w) @ (cov_deriv_tensor(p_field, v, q, gamma) @ v)
        + horizontal_cov_deriv(h, v, q, w, gamma)
    )


def slow_manifold_suite(system: SystemDef, sampler: Sampler, samples: int) -> List[InvariantResult]:
    """Range, homogeneity, force equivalence, projection idempotence, residual order."""
    range_defect = homogeneity = equivalence = idempotence = 0.0
    section = slip_section(system, 2)
    homogeneity_checked = False
    for _ in range(samples):
        q = sampler.configuration()
        vD = sampler.d_velocity(q)
        P = projections(system.metric, system.constraints, system.friction, q).P
        a, b = h1(system, q, vD), h2(system, q, vD)
        range_defect = max(range_defect, max_abs(P @ a), max_abs(P @ b))

        if _potential_free(system, q):
            homogeneity_checked = True
            for s in SCALINGS:
                homogeneity = max(
                    homogeneity,
                    max_abs(h1(system, q, s * vD) - s**2 * a),
                    max_abs(h2(system, q, s * vD) - s**3 * b),
                )

        v = vD + slip(system, q, vD, 2)
        equivalence = max(
            equivalence,
            relative_defect(
                classical_friction_force(system, q, v, section),
                covariant_friction_force(system, q, v, section),
            ),
        )
        u = sampler.vector()
        once = manifold_projection(system, q, u, 2)
        idempotence = max(idempotence, max_abs(manifold_projection(system, q, once, 2) - once))

    results = [
        _result("slip range", "slow_manifold", range_defect, "range"),
        _result("force equivalence", "slow_manifold", equivalence, "force_equivalence"),
        _result("manifold projection idempotence", "slow_manifold", idempotence, "projection"),
    ]
    if homogeneity_checked:
        results.append(_result("slip homogeneity", "slow_manifold", homogeneity, "oracle_slip_analytic"))
    else:
        logger.info("skipping slip homogeneity: the potential term breaks velocity scaling")

    states = [(q, sampler.d_velocity(q)) for q in (sampler.configuration() for _ in range(RESIDUAL_STATES))]
    sup_residuals = []
    for eps in RESIDUAL_EPSILONS:
        scaled = system.with_epsilon(eps)
        candidate = slip_section(scaled, 2)
        sup_residuals.append(
            max(max_abs(generating_residual(scaled, q, vD, candidate)) for q, vD in states)
        )
    fit = fit_loglog_slope(RESIDUAL_EPSILONS, sup_residuals, "residual")
    target, half_width = RESIDUAL_SLOPE
    deviation = abs(fit.slope - target) if fit.slope is not None else float("inf")
    results.append(
        InvariantResult(
            "generating residual order",
            "slow_manifold",
            deviation,
            half_width,
            detail=f"slope {fit.slope}" if fit.slope is not None else "slope undefined",
        )
    )
    return results


def energy_balance_defect(system: SystemDef, q: np.ndarray, v: np.ndarray) -> float:
    """Mismatch between d(KE + V)/dt along the full flow and the friction dissipation.

    The time derivative is taken by differences of the total energy along the
    full-model vector field at (q, v); the result is relative to max(1, |rate|).
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    dq, dv = full_rhs(system, State(0.0, q, v))
    rate = partial_derivatives(
        lambda s: total_energy(system, q + s[0] * dq, v + s[0] * dv), np.zeros(1), system.metric.fd_step
    )[0]
    expected = dissipation_rate(system, q, v)
    return abs(float(rate) - expected) / max(1.0, abs(expected))


def dynamics_suite(system: SystemDef, sampler: Sampler) -> List[InvariantResult]:
    """Energy laws, constraint tangency, attractivity and disk conserved quantities."""
    eps = system.epsilon
    q0 = sampler.configuration()
    results: List[InvariantResult] = []
    A_at = system.constraints.A_at

    oracle = system.oracle
    if oracle is not None:
        vD0 = oracle.constrained_velocity(q0[0], 1.0, 1.0)
    else:
        vD0 = sampler.d_velocity(q0)

    zeroth_plan = SimPlan(model="zeroth", dt=1e-3, t_final=10.0, epsilon=eps)
    zeroth = integrate(model_rhs(system, "zeroth"), initial_state(system, q0, vD0, "zeroth"), zeroth_plan)
    energy = np.array([total_energy(system, s.q, s.v) for s in zeroth])
    results.append(_result("zeroth energy conservation", "dynamics", max_abs(energy - energy[0]), "energy_conservation"))
    tangency = max(max_abs(np.asarray(A_at(s.q)) @ s.v) for s in zeroth)
    results.append(_result("zeroth constraint tangency", "dynamics", tangency, "constraint_tangency"))

    full_plan = SimPlan(model="full", dt=eps / 50.0, t_final=1.0, epsilon=eps)
    full = integrate(model_rhs(system, "full"), initial_state(system, q0, vD0, "full"), full_plan)
    energy = np.array([total_energy(system, s.q, s.v) for s in full])
    increase = float(np.max(np.diff(energy), initial=0.0))
    results.append(_result("full energy monotonicity", "dynamics", max(increase, 0.0), "energy_monotonicity"))
    indices = np.unique(np.linspace(0, len(full) - 1, ENERGY_BALANCE_STATES).astype(int))
    balance = max(energy_balance_defect(system, full.q[i], full.v[i]) for i in indices)
    results.append(_result("full energy balance", "dynamics", balance, "energy_balance"))

    if not _potential_free(system, q0):
        logger.info("skipping full attractivity: the slow manifold is not the constraint distribution when V != 0")
    else:
        pair = projections(system.metric, system.constraints, system.friction, q0)
        plan = SimPlan(model="full", dt=eps / 50.0, t_final=20.0 * eps, epsilon=eps)
        decay = integrate(model_rhs(system, "full"), State(0.0, q0, pair.P_perp @ sampler.vector()), plan)
        final = decay.final
        remaining = invariance_residual(system, final.q, final.v, 2)
        results.append(_result("full attractivity", "dynamics", float(np.linalg.norm(remaining)), "attractivity"))

    if oracle is not None:
        first_plan = SimPlan(model="first", dt=1e-3, t_final=1.0, epsilon=eps)
        first = integrate(model_rhs(system, "first"), initial_state(system, q0, vD0, "first"), first_plan)
        heading = max(
            max_abs(traj.v[:, 0] - traj.v[0, 0]) for traj in (zeroth, full, first)
        )
        heading = max(heading, max_abs(zeroth.v[:, 3] - zeroth.v[0, 3]))
        results.append(_result("disk conserved rates", "dynamics", heading, "conserved_heading_rate"))

        circle_plan = SimPlan(model="zeroth", dt=1e-3, t_final=np.pi, epsilon=eps)
        start = np.zeros(system.dim)
        circle = integrate(
            model_rhs(system, "zeroth"),
            initial_state(system, start, oracle.constrained_velocity(0.0, 1.0, 1.0), "zeroth"),
            circle_plan,
        )
        R = oracle.params.R
        expected_x = R * np.sin(circle.times)
        expected_y = R * (1.0 - np.cos(circle.times))
        circle_defect = max(max_abs(circle.q[:, 1] - expected_x), max_abs(circle.q[:, 2] - expected_y))
        results.append(_result("zeroth circle", "dynamics", circle_defect, "circle"))
    return results


def run_validation(
    system: SystemDef,
    samples: int = 100,
    seed: int = 0,
    fault: Optional[str] = None,
    include_dynamics: bool = True,
) -> List[InvariantResult]:
    """
    Execute every invariant suite in a fixed order.

    Args:
        system: System under test
        samples: Random samples per suite
        seed: Seed of the sample generator
        fault: Optional fault injection (``flip-projection-sign``)
        include_dynamics: Run the integration-based suite

    Returns:
        List[InvariantResult]: One entry per invariant, in suite order
    """
    if fault is not None and fault not in FAULTS:
        raise InvalidParams(f"unknown fault {fault!r}")
    if samples < 1:
        raise InvalidParams(f"samples must be >= 1, got {samples}")
    sampler = Sampler(system, seed)
    results = projection_suite(system, sampler, samples, fault=fault)
    results += geometry_suite(system, sampler, samples)
    results += oracle_suite(system, sampler, samples)
    results += slow_manifold_suite(system, sampler, samples)
    if include_dynamics:
        results += dynamics_suite(system, sampler)
    for result in results:
        level = logging.INFO if result.passed else logging.WARNING
        logger.log(level, "%s: defect %.3e (tol %.1e)", result.name, result.defect, result.tolerance)
    return results


def first_failure(results: List[InvariantResult]) -> Optional[InvariantResult]:
    return next((r for r in results if not r.passed), None)


def raise_on_failure(results: List[InvariantResult]) -> None:
    failed = first_failure(results)
    if failed is not None:
        raise ValidationFailure(failed.name, failed.defect, failed.tolerance)
