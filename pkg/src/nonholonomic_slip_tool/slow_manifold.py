"""
Slow-Manifold Slip Sections

The slow manifold of the strongly damped system is the image of the section
v_D -> v_D + h_eps(v_D), with slip velocity h_eps = eps h1 + eps^2 h2 + ...
in D-perp. This module evaluates h1 and h2 through projections, covariant
derivatives and the Q-map, assembles truncations, and measures how far a
candidate section is from solving the generating equation.

Velocities passed to the slip functions are projected onto D first, so they
are total functions on the ambient velocity space.
"""

import logging
from typing import NamedTuple, Optional

import numpy as np

from .constraints import LocalProjections, local_projections
from .exceptions import UnsupportedOrder
from .geometry import bundle_partials, gamma_matrix, horizontal_cov_deriv, vertical_jacobian
from .types import BundleMap, SystemDef

logger = logging.getLogger(__name__)


def _check_order(order: int) -> int:
    if order not in (0, 1, 2):
        raise UnsupportedOrder(f"slip order {order} not in {{0, 1, 2}}")
    return order


def _h1_local(local: LocalProjections, u: np.ndarray) -> np.ndarray:
    pair = local.pair
    return pair.Q @ (local.cov_perp(u, u) - pair.P_perp @ local.grad_sharp)


def h1(system: SystemDef, q: np.ndarray, vD: np.ndarray) -> np.ndarray:
    """First-order slip Q[(nabla_v P-perp)(v) - P-perp (dV)^sharp], v = P vD."""
    local = local_projections(system, q)
    u = local.pair.P @ np.asarray(vD, dtype=float)
    return _h1_local(local, u)


def h1_map(system: SystemDef) -> BundleMap:
    """h1 as a bundle map.

    Systems with a closed-form reference use its analytic partials; all
    others fall back to finite differences of the generic evaluation.
    """
    oracle = system.oracle
    analytic = None
    if oracle is not None and getattr(oracle, "analytic_partials", False):
        analytic = oracle.h1_partials
    return BundleMap(
        eval=lambda q, w: h1(system, q, w),
        analytic_partials=analytic,
        fd_step=system.metric.fd_step,
    )


def _h2_local(
    system: SystemDef, local: LocalProjections, q: np.ndarray, u: np.ndarray
) -> np.ndarray:
    pair = local.pair
    slip1 = h1_map(system)
    h1_value = _h1_local(local, u)
    dv_h1 = vertical_jacobian(slip1, q, u)

    cross = local.cov_perp(h1_value, u) + local.cov_perp(u, h1_value)
    vertical = dv_h1 @ local.cov_p(u, u) - dv_h1 @ (pair.P @ local.grad_sharp)
    horizontal = horizontal_cov_deriv(slip1, u, q, u, local.gamma)
    return pair.Q @ cross - pair.Q @ vertical - pair.Q @ horizontal


def h2(system: SystemDef, q: np.ndarray, vD: np.ndarray) -> np.ndarray:
    """Second-order slip.

    Q[(nabla_h1 P-perp)(v) + (nabla_v P-perp)(h1)]
      - Q[D^V h1 ((nabla_v P)(v)) - D^V h1 P (dV)^sharp]
      - Q[nabla^H_v h1 (v)],   v = P vD
    """
    q = np.asarray(q, dtype=float)
    local = local_projections(system, q)
    u = local.pair.P @ np.asarray(vD, dtype=float)
    return _h2_local(system, local, q, u)


def slip(system: SystemDef, q: np.ndarray, vD: np.ndarray, order: int) -> np.ndarray:
    """Truncated slip velocity: 0, eps h1, or eps h1 + eps^2 h2.

    Raises:
        UnsupportedOrder: If order is not 0, 1 or 2
    """
    _check_order(order)
    q = np.asarray(q, dtype=float)
    if order == 0:
        return np.zeros(system.dim)
    eps = system.epsilon
    local = local_projections(system, q)
    u = local.pair.P @ np.asarray(vD, dtype=float)
    result = eps * _h1_local(local, u)
    if order == 2:
        result = result + eps**2 * _h2_local(system, local, q, u)
    return result


def slip_section(system: SystemDef, order: int) -> BundleMap:
    """The order-k truncation as a bundle map with finite-difference partials."""
    _check_order(order)
    return BundleMap(
        eval=lambda q, w: slip(system, q, w, order),
        fd_step=system.metric.fd_step,
    )


def generating_residual(
    system: SystemDef, q: np.ndarray, vD: np.ndarray, hcand: BundleMap
) -> np.ndarray:
    """Right-hand side of the generating equation minus the candidate slip.

    With v = v_D + h (h = hcand(q, v_D)) the right-hand side is
    eps Q[(nabla_v P-perp)(v) - P-perp (dV)^sharp
          - D^V h ((nabla_v P)(v) - P (dV)^sharp) - nabla^H_v h (v_D)],
    which carries the quadratic terms in h that order-by-order truncations drop.
    """
    q = np.asarray(q, dtype=float)
    local = local_projections(system, q)
    pair = local.pair
    u = pair.P @ np.asarray(vD, dtype=float)
    h = np.asarray(hcand.eval(q, u), dtype=float)
    v = u + h

    dv_h = vertical_jacobian(hcand, q, u)
    bracket = (
        local.cov_perp(v, v)
        - pair.P_perp @ local.grad_sharp
        - dv_h @ (local.cov_p(v, v) - pair.P @ local.grad_sharp)
        - horizontal_cov_deriv(hcand, v, q, u, local.gamma)
    )
    return system.epsilon * (pair.Q @ bracket) - h


def invariance_residual(system: SystemDef, q: np.ndarray, v: np.ndarray, order: int) -> np.ndarray:
    """P-perp v - h_eps(P v): zero iff v lies on the order-k manifold model."""
    _check_order(order)
    local = local_projections(system, q)
    v = np.asarray(v, dtype=float)
    return local.pair.P_perp @ v - slip(system, q, local.pair.P @ v, order)


def manifold_projection(system: SystemDef, q: np.ndarray, v: np.ndarray, order: int) -> np.ndarray:
    """H_eps(v) = P v + h_eps(P v), the nonlinear projection onto the manifold model."""
    local = local_projections(system, q)
    u = local.pair.P @ np.asarray(v, dtype=float)
    return u + slip(system, q, u, order)


def normal_projection(system: SystemDef, q: np.ndarray, v: np.ndarray, order: int) -> np.ndarray:
    """H-perp_eps(v) = v - H_eps(v)."""
    return np.asarray(v, dtype=float) - manifold_projection(system, q, v, order)


class FirstOrderTerms(NamedTuple):
    local: LocalProjections
    u: np.ndarray  # P v
    h1: np.ndarray
    vertical_jacobian: np.ndarray  # D^V h1 at (q, u)
    horizontal: np.ndarray  # nabla^H_u h1 (u)


def first_order_terms(
    system: SystemDef, q: np.ndarray, v: np.ndarray, local: Optional[LocalProjections] = None
) -> FirstOrderTerms:
    """h1 at (q, P v) with its vertical Jacobian and horizontal derivative along P v."""
    q = np.asarray(q, dtype=float)
    if local is None:
        local = local_projections(system, q)
    u = local.pair.P @ np.asarray(v, dtype=float)
    h1_value = _h1_local(local, u)
    dq_h1, dv_h1 = bundle_partials(h1_map(system), q, u)
    G_u = gamma_matrix(local.gamma, u)
    horizontal = dq_h1 @ u + G_u @ h1_value - dv_h1 @ (G_u @ u)
    return FirstOrderTerms(local, u, h1_value, dv_h1, horizontal)
