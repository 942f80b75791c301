"""
Utility functions for error norms, slope fits and verdicts.
"""

from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .exceptions import DimensionMismatch, InvalidParams
from .types import EXPECTED_SLOPES, ConvergencePoint, SlopeFit, Trajectory

# Relative slack when matching sample times of two trajectories
TIME_MATCH_TOLERANCE = 1e-9


def max_abs(array: np.ndarray) -> float:
    """Max-abs entry, 0 for empty arrays."""
    return float(np.max(np.abs(array), initial=0.0))


def relative_defect(a: np.ndarray, b: np.ndarray) -> float:
    """||a - b|| / max(||a||, tiny)."""
    scale = max(float(np.linalg.norm(a)), np.finfo(float).tiny)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b))) / scale


def g_norm(G: np.ndarray, u: np.ndarray) -> float:
    """sqrt(u^T G u)."""
    return float(np.sqrt(max(float(u @ G @ u), 0.0)))


def sup_configuration_error(reference: Trajectory, candidate: Trajectory, skip: float) -> float:
    """sup over shared samples with t >= skip of ||q_ref(t) - q(t)||_inf.

    Raises:
        DimensionMismatch: If the trajectories were not sampled at the same times
        InvalidParams: If no sample survives the transient skip
    """
    if len(reference) != len(candidate) or not np.allclose(
        reference.times, candidate.times, rtol=TIME_MATCH_TOLERANCE, atol=TIME_MATCH_TOLERANCE
    ):
        raise DimensionMismatch("trajectories are not sampled at shared times")
    mask = reference.times >= skip * (1.0 - TIME_MATCH_TOLERANCE)
    if not np.any(mask):
        raise InvalidParams(f"transient skip {skip} discards every sample")
    return float(np.max(np.abs(reference.q[mask] - candidate.q[mask])))


def fit_loglog_slope(epsilons: Sequence[float], errors: Sequence[float], order: str) -> SlopeFit:
    """Least-squares line through (log eps, log error).

    Non-positive or non-finite errors cannot be fitted; with fewer than two
    usable points the fit fields are None.
    """
    eps = np.asarray(epsilons, dtype=float)
    err = np.asarray(errors, dtype=float)
    usable = np.isfinite(err) & (err > 0.0) & (eps > 0.0)
    if np.count_nonzero(usable) < 2:
        return SlopeFit(order=order, slope=None, intercept=None, residual=None, epsilons=list(eps))

    x, y = np.log(eps[usable]), np.log(err[usable])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return SlopeFit(
        order=order,
        slope=float(slope),
        intercept=float(intercept),
        residual=residual,
        epsilons=list(eps),
    )


def slope_fits(points: Iterable[ConvergencePoint]) -> List[SlopeFit]:
    """One fit per order, in order of first appearance."""
    grouped: Dict[str, List[ConvergencePoint]] = {}
    for point in points:
        if point.is_successful:
            grouped.setdefault(point.order, []).append(point)
    return [
        fit_loglog_slope([p.epsilon for p in group], [p.error for p in group], order)
        for order, group in grouped.items()
    ]


def determine_slope_verdict(fit: SlopeFit) -> Tuple[bool, str]:
    """Compare a fitted slope with the expected order of its reduced model."""
    expected = EXPECTED_SLOPES.get(fit.order)
    if expected is None:
        return True, f"no expected slope for order {fit.order}"
    target, half_width = expected
    if fit.slope is None:
        return False, f"order {fit.order}: slope could not be fitted"
    passed = abs(fit.slope - target) <= half_width
    return passed, f"order {fit.order}: slope {fit.slope:.3f} (expected {target} +/- {half_width})"
