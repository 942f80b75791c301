"""
Riemannian Geometry on a Coordinate Chart

Metric evaluation, Christoffel symbols, the musical isomorphisms and covariant
derivatives of vector fields, (1,1)-tensor fields and nonlinear tangent-bundle
maps. All quantities are coordinate-basis component arrays; indices are raised
and lowered only through ``sharp``/``flat``.

Derivatives of fields use analytic callbacks when provided and 4th-order
central differences otherwise.
"""

import logging
from typing import Callable, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .exceptions import DimensionMismatch, SingularMetric
from .types import (
    BundleMap,
    ChristoffelData,
    MetricField,
    PotentialField,
    TensorField11,
    VectorField,
)
from .utils.finite_differences import jacobian, partial_derivatives

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12


def _as_vector(x, dim: int, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (dim,):
        raise DimensionMismatch(f"{name} has shape {arr.shape}, expected ({dim},)")
    return arr


def factor_metric(G: np.ndarray) -> Tuple[np.ndarray, bool]:
    """Cholesky factor of G; the factorization doubles as the positive-definite test.

    Raises:
        SingularMetric: If G is not positive definite.
    """
    try:
        return cho_factor(G, check_finite=True)
    except (LinAlgError, ValueError) as exc:
        logger.debug("metric factorization failed: %s", exc)
        raise SingularMetric(f"metric is not positive definite: {exc}") from exc


def metric_value(metric: MetricField, q: np.ndarray, validate: bool = False) -> np.ndarray:
    """Evaluate G(q), optionally checking symmetry and positive definiteness."""
    G = np.asarray(metric.value_at(q), dtype=float)
    if G.shape != (metric.dim, metric.dim):
        raise DimensionMismatch(
            f"metric has shape {G.shape}, expected ({metric.dim}, {metric.dim})"
        )
    if validate:
        if np.max(np.abs(G - G.T), initial=0.0) > SYMMETRY_TOLERANCE:
            raise SingularMetric("metric is not symmetric")
        factor_metric(G)
    return G


def metric_partials(metric: MetricField, q: np.ndarray) -> np.ndarray:
    """(n, n, n) array whose slice [k] is dG/dq^k."""
    q = np.asarray(q, dtype=float)
    if metric.partials_at is not None:
        dG = np.asarray(metric.partials_at(q), dtype=float)
    else:
        dG = partial_derivatives(metric.value_at, q, metric.fd_step)
    if dG.shape != (metric.dim,) * 3:
        raise DimensionMismatch(f"metric partials have shape {dG.shape}")
    return 0.5 * (dG + np.transpose(dG, (0, 2, 1)))


def christoffel(metric: MetricField, q: np.ndarray, validate: bool = False) -> ChristoffelData:
    """Christoffel symbols Gamma^i_jk = 1/2 G^il (d_j G_kl + d_k G_jl - d_l G_jk).

    Args:
        metric: Kinetic-energy metric field
        q: Configuration
        validate: Also check symmetry of G(q)

    Returns:
        ChristoffelData: coeffs[i, j, k] = Gamma^i_jk, symmetric in (j, k)

    Raises:
        SingularMetric: If G(q) fails the positive-definite factorization
    """
    q = _as_vector(q, metric.dim, "configuration")
    G = metric_value(metric, q, validate=validate)
    factor = factor_metric(G)
    dG = metric_partials(metric, q)

    # lowered[j, k, l] = d_j G_kl + d_k G_jl - d_l G_jk
    lowered = dG + np.transpose(dG, (1, 0, 2)) - np.transpose(dG, (1, 2, 0))
    n = metric.dim
    raised = cho_solve(factor, lowered.reshape(n * n, n).T)  # G^il applied on l
    coeffs = 0.5 * raised.reshape(n, n, n)
    coeffs = 0.5 * (coeffs + np.transpose(coeffs, (0, 2, 1)))
    return ChristoffelData(coeffs=coeffs)


def gamma_matrix(gamma: ChristoffelData, X: np.ndarray) -> np.ndarray:
    """[Gamma(q, X)]^i_k = Gamma^i_kj X^j."""
    X = _as_vector(X, gamma.dim, "X")
    return np.einsum("ikj,j->ik", gamma.coeffs, X)


def sharp(metric: MetricField, q: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Raise a covector: G^-1 omega."""
    omega = _as_vector(omega, metric.dim, "covector")
    return cho_solve(factor_metric(metric_value(metric, q)), omega)


def flat(metric: MetricField, q: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Lower a vector: G X."""
    X = _as_vector(X, metric.dim, "vector")
    return metric_value(metric, q) @ X


def potential_gradient(potential: PotentialField, q: np.ndarray) -> np.ndarray:
    """Covector dV at q."""
    q = np.asarray(q, dtype=float)
    if potential.gradient_at is not None:
        return np.asarray(potential.gradient_at(q), dtype=float)
    return partial_derivatives(
        lambda x: np.asarray(potential.value_at(x), dtype=float), q, potential.fd_step
    )


def _vector_jacobian(Y: VectorField, q: np.ndarray) -> np.ndarray:
    if Y.jacobian_at is not None:
        return np.asarray(Y.jacobian_at(q), dtype=float)
    return jacobian(Y.value_at, q, Y.fd_step)


def cov_deriv_vector(
    Y: Union[VectorField, Callable[[np.ndarray], np.ndarray]],
    X: np.ndarray,
    q: np.ndarray,
    gamma: ChristoffelData,
) -> np.ndarray:
    """nabla_X Y = [dY/dq] X + [Gamma(q, X)] Y."""
    if not isinstance(Y, VectorField):
        Y = VectorField(value_at=Y)
    n = gamma.dim
    q = _as_vector(q, n, "configuration")
    X = _as_vector(X, n, "X")
    value = _as_vector(Y.value_at(q), n, "Y(q)")
    return _vector_jacobian(Y, q) @ X + gamma_matrix(gamma, X) @ value


def tensor_partials(A: TensorField11, q: np.ndarray) -> np.ndarray:
    """(n, n, n) array whose slice [k] is dA/dq^k."""
    q = np.asarray(q, dtype=float)
    if A.partials_at is not None:
        return np.asarray(A.partials_at(q), dtype=float)
    return partial_derivatives(A.value_at, q, A.fd_step)


def covariant_tensor_derivative(
    value: np.ndarray, partials: np.ndarray, X: np.ndarray, gamma: ChristoffelData
) -> np.ndarray:
    """[nabla_X A] from the value and coordinate partials of A at one point."""
    n = gamma.dim
    if value.shape != (n, n) or partials.shape != (n, n, n):
        raise DimensionMismatch(
            f"tensor value {value.shape} / partials {partials.shape} for dim {n}"
        )
    X = _as_vector(X, n, "X")
    G_X = gamma_matrix(gamma, X)
    return np.einsum("kij,k->ij", partials, X) + G_X @ value - value @ G_X


def cov_deriv_tensor(
    A: TensorField11, X: np.ndarray, q: np.ndarray, gamma: ChristoffelData
) -> np.ndarray:
    """[nabla_X A] = sum_k [dA/dq^k] X^k + [Gamma(q,X)][A] - [A][Gamma(q,X)]."""
    q = _as_vector(q, gamma.dim, "configuration")
    value = np.asarray(A.value_at(q), dtype=float)
    return covariant_tensor_derivative(value, tensor_partials(A, q), X, gamma)


def bundle_partials(h: BundleMap, q: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(dh/dq, dh/dw) at (q, w), rows indexing the output component."""
    q = np.asarray(q, dtype=float)
    w = np.asarray(w, dtype=float)
    if h.analytic_partials is not None:
        dq, dw = h.analytic_partials(q, w)
        return np.asarray(dq, dtype=float), np.asarray(dw, dtype=float)
    dq = jacobian(lambda x: h.eval(x, w), q, h.fd_step)
    dw = jacobian(lambda x: h.eval(q, x), w, h.fd_step)
    return dq, dw


def vertical_jacobian(h: BundleMap, q: np.ndarray, w: np.ndarray) -> np.ndarray:
    """D^V h = [dh^m / dw^l] at (q, w)."""
    w = np.asarray(w, dtype=float)
    if h.analytic_partials is not None:
        return np.asarray(h.analytic_partials(np.asarray(q, dtype=float), w)[1], dtype=float)
    return jacobian(lambda x: h.eval(q, x), w, h.fd_step)


def horizontal_cov_deriv(
    h: BundleMap,
    X: np.ndarray,
    q: np.ndarray,
    w: np.ndarray,
    gamma: ChristoffelData,
) -> np.ndarray:
    """nabla^H_X h = [dh/dq] X + [Gamma(q,X)] h - [D^V h][Gamma(q,X)] w."""
    n = gamma.dim
    q = _as_vector(q, n, "configuration")
    w = _as_vector(w, n, "w")
    X = _as_vector(X, n, "X")
    dq, dw = bundle_partials(h, q, w)
    G_X = gamma_matrix(gamma, X)
    return dq @ X + G_X @ np.asarray(h.eval(q, w), dtype=float) - dw @ (G_X @ w)
