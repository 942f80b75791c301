"""
Constraint Distribution and Projections

Builds the distribution D = ker A(q), its G-orthogonal complement, the
projection pair (P, P-perp), the Rayleigh friction operator FR_sharp, the
Q-map inverting FR_sharp on D-perp, and the ideal Lagrange multiplier.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.linalg import cho_solve, null_space

from .exceptions import DimensionMismatch, IllConditionedFrame, RankDeficientConstraints
from .geometry import (
    christoffel,
    covariant_tensor_derivative,
    factor_metric,
    metric_partials,
    metric_value,
    potential_gradient,
)
from .types import (
    CONDITION_LIMIT,
    ChristoffelData,
    ConstraintSet,
    FrictionSpec,
    MetricField,
    ProjectionPair,
    SystemDef,
    TensorField11,
)
from .utils.finite_differences import partial_derivatives

logger = logging.getLogger(__name__)

# Off-block entries of FR_sharp in the adapted frame, relative to its scale
BLOCK_TOLERANCE = 1e-8


def _guard_condition(matrix: np.ndarray, what: str, error: type) -> None:
    if matrix.size == 0:
        return
    cond = np.linalg.cond(matrix)
    if not np.isfinite(cond) or cond > CONDITION_LIMIT:
        raise error(f"{what} has condition number {cond:.3e} > {CONDITION_LIMIT:.0e}")


def constraint_matrix(cs: ConstraintSet, q: np.ndarray) -> np.ndarray:
    """A(q) as an m x n array."""
    A = np.asarray(cs.A_at(np.asarray(q, dtype=float)), dtype=float)
    if A.ndim != 2 or A.shape[0] != cs.m:
        raise DimensionMismatch(f"constraint matrix has shape {A.shape}, expected m={cs.m} rows")
    return A


def constraint_partials(cs: ConstraintSet, q: np.ndarray) -> np.ndarray:
    """(n, m, n) array whose slice [k] is dA/dq^k."""
    q = np.asarray(q, dtype=float)
    if cs.partials_at is not None:
        return np.asarray(cs.partials_at(q), dtype=float)
    return partial_derivatives(cs.A_at, q, cs.fd_step)


def friction_matrix(fs: FrictionSpec, q: np.ndarray, m: int) -> np.ndarray:
    mu = np.asarray(fs.mu_at(np.asarray(q, dtype=float)), dtype=float)
    if mu.shape != (m, m):
        raise DimensionMismatch(f"friction matrix has shape {mu.shape}, expected ({m}, {m})")
    return mu


def complement_frame(metric: MetricField, cs: ConstraintSet, q: np.ndarray) -> np.ndarray:
    """Columns G^-1 A^T spanning D-perp.

    Raises:
        RankDeficientConstraints: If rank A(q) < m
    """
    A = constraint_matrix(cs, q)
    if cs.m == 0:
        return np.zeros((metric.dim, 0))
    if np.linalg.matrix_rank(A) < cs.m:
        raise RankDeficientConstraints(f"rank A(q) < {cs.m}")
    return cho_solve(factor_metric(metric_value(metric, q)), A.T)


def distribution_frame(cs: ConstraintSet, q: np.ndarray) -> np.ndarray:
    """n x (n - m) columns spanning D.

    Uses the smooth user frame when the constraint set supplies one; otherwise
    an orthonormal null-space basis of A(q) with every column's
    largest-magnitude entry made positive.
    """
    A = constraint_matrix(cs, q)
    n = A.shape[1]
    if cs.D_frame_at is not None:
        S = np.asarray(cs.D_frame_at(np.asarray(q, dtype=float)), dtype=float)
        if S.shape != (n, n - cs.m):
            raise DimensionMismatch(f"D frame has shape {S.shape}, expected ({n}, {n - cs.m})")
        return S
    if cs.m == 0:
        return np.eye(n)
    S = null_space(A)
    if S.shape[1] != n - cs.m:
        raise RankDeficientConstraints(f"null space of A(q) has dimension {S.shape[1]}")
    pivots = np.argmax(np.abs(S), axis=0)
    signs = np.sign(S[pivots, np.arange(S.shape[1])])
    return S * np.where(signs == 0, 1.0, signs)


def friction_operator(
    metric: MetricField, cs: ConstraintSet, fs: FrictionSpec, q: np.ndarray
) -> np.ndarray:
    """FR_sharp = G^-1 A^T mu A, without the rest of the projection pair."""
    if cs.m == 0:
        return np.zeros((metric.dim, metric.dim))
    A = constraint_matrix(cs, q)
    W = cho_solve(factor_metric(metric_value(metric, q)), A.T)
    return W @ friction_matrix(fs, q, cs.m) @ A


def perp_projector(metric: MetricField, cs: ConstraintSet, q: np.ndarray) -> np.ndarray:
    """P-perp = W (A W)^-1 A with W = G^-1 A^T."""
    n = metric.dim
    if cs.m == 0:
        return np.zeros((n, n))
    A = constraint_matrix(cs, q)
    W = cho_solve(factor_metric(metric_value(metric, q)), A.T)
    M = A @ W
    _guard_condition(M, "constraint Gram matrix A G^-1 A^T", RankDeficientConstraints)
    return W @ np.linalg.solve(M, A)


def perp_projector_partials(metric: MetricField, cs: ConstraintSet, q: np.ndarray) -> np.ndarray:
    """(n, n, n) array of dP-perp/dq^k by the product rule through G^-1 and A."""
    n = metric.dim
    if cs.m == 0:
        return np.zeros((n, n, n))
    q = np.asarray(q, dtype=float)
    factor = factor_metric(metric_value(metric, q))
    A = constraint_matrix(cs, q)
    dG = metric_partials(metric, q)
    dA = constraint_partials(cs, q)

    W = cho_solve(factor, A.T)
    M_inv = np.linalg.inv(A @ W)
    partials = np.empty((n, n, n))
    for k in range(n):
        dW = cho_solve(factor, dA[k].T - dG[k] @ W)
        dM = dA[k] @ W + A @ dW
        dM_inv = -M_inv @ dM @ M_inv
        partials[k] = dW @ M_inv @ A + W @ dM_inv @ A + W @ M_inv @ dA[k]
    return partials


def projector_fields(system: SystemDef) -> Tuple[TensorField11, TensorField11]:
    """(P, P-perp) as tensor fields carrying product-rule partials."""
    metric, cs = system.metric, system.constraints
    identity = np.eye(system.dim)

    p_perp = TensorField11(
        value_at=lambda q: perp_projector(metric, cs, q),
        partials_at=lambda q: perp_projector_partials(metric, cs, q),
        fd_step=metric.fd_step,
    )
    p = TensorField11(
        value_at=lambda q: identity - perp_projector(metric, cs, q),
        partials_at=lambda q: -perp_projector_partials(metric, cs, q),
        fd_step=metric.fd_step,
    )
    return p, p_perp


def projections(
    metric: MetricField, cs: ConstraintSet, fs: FrictionSpec, q: np.ndarray
) -> ProjectionPair:
    """Projection pair, friction operator and Q-map at q.

    Q is built in the adapted frame Phi = [S | W]: FR_sharp is block diagonal
    there with a zero D-block; the D-perp block is inverted and mapped back.

    Raises:
        RankDeficientConstraints: If A(q) loses rank
        IllConditionedFrame: If Phi or the D-perp block exceeds the condition
            guard, or FR_sharp is not block diagonal in Phi
    """
    n = metric.dim
    q = np.asarray(q, dtype=float)
    m = cs.m
    if m == 0:
        zero = np.zeros((n, n))
        return ProjectionPair(
            P=np.eye(n),
            P_perp=zero,
            D_frame=distribution_frame(cs, q),
            Dperp_frame=np.zeros((n, 0)),
            Q=zero.copy(),
            FR_sharp=zero.copy(),
        )

    factor = factor_metric(metric_value(metric, q))
    A = constraint_matrix(cs, q)
    W = cho_solve(factor, A.T)
    M = A @ W
    _guard_condition(M, "constraint Gram matrix A G^-1 A^T", RankDeficientConstraints)
    P_perp = W @ np.linalg.solve(M, A)
    P = np.eye(n) - P_perp
    FR = W @ friction_matrix(fs, q, m) @ A

    S = distribution_frame(cs, q)
    phi = np.hstack([S, W])
    _guard_condition(phi, "adapted frame [S | W]", IllConditionedFrame)
    fr_adapted = np.linalg.solve(phi, FR @ phi)

    r = n - m
    off_block = max(
        np.max(np.abs(fr_adapted[:r, :]), initial=0.0),
        np.max(np.abs(fr_adapted[:, :r]), initial=0.0),
    )
    scale = max(1.0, float(np.max(np.abs(fr_adapted))))
    if off_block > BLOCK_TOLERANCE * scale:
        raise IllConditionedFrame(
            f"friction operator is not block diagonal in [S | W] (off-block {off_block:.3e})"
        )
    block = fr_adapted[r:, r:]
    _guard_condition(block, "friction block on D-perp", IllConditionedFrame)

    q_adapted = np.zeros((n, n))
    q_adapted[r:, r:] = np.linalg.inv(block)
    Q = np.linalg.solve(phi.T, (phi @ q_adapted).T).T
    return ProjectionPair(P=P, P_perp=P_perp, D_frame=S, Dperp_frame=W, Q=Q, FR_sharp=FR)


def q_map_apply(pp: ProjectionPair, u: np.ndarray) -> np.ndarray:
    """Q u; satisfies Q FR_sharp v = P-perp v."""
    u = np.asarray(u, dtype=float)
    if u.shape != (pp.Q.shape[0],):
        raise DimensionMismatch(f"vector has shape {u.shape}, expected ({pp.Q.shape[0]},)")
    return pp.Q @ u


@dataclass(frozen=True)
class LocalProjections:
    """Everything the slip and reduced-dynamics formulas need at one configuration."""

    pair: ProjectionPair
    gamma: ChristoffelData
    perp_partials: np.ndarray  # (n, n, n), [k] = dP-perp/dq^k
    grad_sharp: np.ndarray  # (dV)^sharp

    def cov_perp(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """(nabla_X P-perp)(Y)."""
        return covariant_tensor_derivative(self.pair.P_perp, self.perp_partials, X, self.gamma) @ Y

    def cov_p(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        """(nabla_X P)(Y)."""
        return covariant_tensor_derivative(self.pair.P, -self.perp_partials, X, self.gamma) @ Y


def local_projections(system: SystemDef, q: np.ndarray) -> LocalProjections:
    q = np.asarray(q, dtype=float)
    metric, cs = system.metric, system.constraints
    pair = projections(metric, cs, system.friction, q)
    G = metric_value(metric, q)
    grad_sharp = cho_solve(factor_metric(G), potential_gradient(system.potential, q))
    return LocalProjections(
        pair=pair,
        gamma=christoffel(metric, q),
        perp_partials=perp_projector_partials(metric, cs, q),
        grad_sharp=grad_sharp,
    )


def lagrange_multiplier(system: SystemDef, q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Ideal constraint reaction lambda = -(nabla_v P-perp)(v) + P-perp (dV)^sharp.

    Evaluated as written for any v; lies in D-perp when v is in D.
    """
    local = local_projections(system, q)
    v = np.asarray(v, dtype=float)
    return -local.cov_perp(v, v) + local.pair.P_perp @ local.grad_sharp
