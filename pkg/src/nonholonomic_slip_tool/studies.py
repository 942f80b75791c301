"""
Simulation and Sweep Orchestration

This module coordinates single simulations and epsilon-sweep convergence
studies: building systems from configuration, placing initial states on the
manifold model, integrating the full and reduced models, and collecting error
norms. Sweep jobs (one per epsilon) fan out over worker processes and are
joined in input order, so results do not depend on the worker count.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, List, Tuple

from .config import RunConfig
from .dynamics import initial_state, simulate
from .exceptions import InvalidParams, SlipToolError
from .metrics_calculator import determine_slope_verdict, slope_fits, sup_configuration_error
from .systems import initial_configuration_and_velocity, load_system
from .types import ConvergencePoint, SimPlan, Trajectory

logger = logging.getLogger(__name__)

# Sweep order label -> reduced model
ORDER_MODELS = {"0": "zeroth", "1": "first", "full": "full"}

MIN_SWEEP_POINTS = 3


def run_simulation(config: RunConfig) -> Tuple[Trajectory, SimPlan]:
    """
    Integrate the model selected in ``sim`` from the ``initial`` state.

    Args:
        config: Parsed run configuration

    Returns:
        Tuple[Trajectory, SimPlan]: Recorded samples and the plan that produced them

    Raises:
        SchemaError, InvalidParams: If the configuration is invalid
        StepTooLargeForStiffness: Full model with dt > epsilon / 20
        NonFiniteState: If the integration diverges

    Example:
        >>> trajectory, plan = run_simulation(RunConfig.from_yaml("configs/disk.yaml"))
        >>> print(trajectory.final.q)
    """
    system = load_system(config)
    plan = config.sim.to_plan(epsilon=system.epsilon)
    q0, vD0 = initial_configuration_and_velocity(system, config)
    state0 = initial_state(system, q0, vD0, plan.model, config.initial.slip_order)
    logger.info("simulating %s (%s model, eps=%g)", system.name, plan.model, plan.epsilon)
    return simulate(system, state0, plan), plan


def sweep_plan(config: RunConfig, epsilon: float, model: str = "full") -> SimPlan:
    """Plan for one sweep point: dt and transient skip scale with epsilon."""
    sweep = config.sweep
    t_final = sweep.t_final if sweep.t_final is not None else config.sim.t_final
    return SimPlan(
        model=model,
        dt=epsilon * sweep.dt_over_epsilon,
        t_final=t_final,
        epsilon=epsilon,
        record_every=config.sim.record_every,
        transient_skip=epsilon * sweep.skip_over_epsilon,
    )


def compute_convergence_point(config: RunConfig, epsilon: float) -> List[ConvergencePoint]:
    """
    Compare every requested reduced model with the full model at one epsilon.

    The full model starts on the order-``initial.slip_order`` manifold model;
    each reduced model starts from the same configuration with the slip it
    carries (zeroth: none, first: eps h1).

    Returns:
        List[ConvergencePoint]: One point per entry of ``sweep.orders``
    """
    system = load_system(config).with_epsilon(epsilon)
    q0, vD0 = initial_configuration_and_velocity(system, config)
    slip_order = config.initial.slip_order

    reference_plan = sweep_plan(config, epsilon)
    reference = simulate(system, initial_state(system, q0, vD0, "full", slip_order), reference_plan)

    points = []
    for order in config.sweep.orders:
        model = ORDER_MODELS[order]
        if model == "full":
            candidate = reference
        else:
            plan = replace(reference_plan, model=model)
            state0 = initial_state(system, q0, vD0, model, slip_order)
            candidate = simulate(system, state0, plan)
        error = sup_configuration_error(reference, candidate, reference_plan.transient_skip)
        logger.info("eps=%g order=%s error=%.6e", epsilon, order, error)
        points.append(ConvergencePoint(epsilon=epsilon, order=order, error=error))
    return points


def _guarded_point(config: RunConfig, epsilon: float) -> List[ConvergencePoint]:
    try:
        return compute_convergence_point(config, epsilon)
    except SlipToolError as e:
        logger.warning("sweep point eps=%g failed: %s", epsilon, e)
        message = f"{type(e).__name__}: {e}"
        return [
            ConvergencePoint(epsilon=epsilon, order=order, error_message=message)
            for order in config.sweep.orders
        ]


def batch_compute_convergence(
    config: RunConfig,
    jobs: int = 1,
    continue_on_error: bool = True,
) -> List[ConvergencePoint]:
    """
    Run the epsilon sweep described by ``config.sweep``.

    Args:
        config: Parsed run configuration
        jobs: Worker processes; 1 runs in-process
        continue_on_error: Record failed points instead of raising (default: True)

    Returns:
        List[ConvergencePoint]: Points ordered by (epsilon, order) as configured

    Raises:
        InvalidParams: If the sweep has fewer than three epsilons or jobs < 1

    Example:
        >>> points = batch_compute_convergence(config, jobs=4)
        >>> successful = [p for p in points if p.is_successful]
    """
    epsilons = config.sweep.epsilons
    if len(epsilons) < MIN_SWEEP_POINTS:
        raise InvalidParams(f"sweep.epsilons needs at least {MIN_SWEEP_POINTS} entries")
    if jobs < 1:
        raise InvalidParams(f"jobs must be >= 1, got {jobs}")

    # Validate the system once before fanning out
    load_system(config)
    worker = _guarded_point if continue_on_error else compute_convergence_point
    logger.info(
        "sweeping %d epsilons x %d orders on %d worker(s)", len(epsilons), len(config.sweep.orders), jobs
    )

    if jobs == 1:
        rows = [worker(config, eps) for eps in epsilons]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(epsilons))) as pool:
            rows = list(pool.map(worker, [config] * len(epsilons), epsilons))

    return [point for row in rows for point in row]


def get_convergence_summary(points: List[ConvergencePoint]) -> Dict:
    """
    Slopes, verdicts and counts for a finished sweep.

    Returns:
        Dictionary with the epsilon grid, per-order fits and pass flags
    """
    fits = slope_fits(points)
    verdicts = {fit.order: determine_slope_verdict(fit) for fit in fits}
    failed = [p for p in points if not p.is_successful]
    return {
        "epsilons": sorted({p.epsilon for p in points}, reverse=True),
        "total_points": len(points),
        "failed_points": len(failed),
        "slopes": [fit.to_dict() for fit in fits],
        "verdicts": {order: reason for order, (_, reason) in verdicts.items()},
        "passed": {order: passed for order, (passed, _) in verdicts.items()},
    }

