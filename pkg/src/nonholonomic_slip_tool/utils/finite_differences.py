"""Fourth-order central differences used wherever analytic partials are absent."""

from typing import Callable

import numpy as np

# (f(x - 2h) - 8 f(x - h) + 8 f(x + h) - f(x + 2h)) / 12h
_OFFSETS = (-2.0, -1.0, 1.0, 2.0)
_WEIGHTS = (1.0, -8.0, 8.0, -1.0)


def coordinate_step(x: float, fd_step: float) -> float:
    """Step fd_step * max(1, |x|) for coordinate value x."""
    return fd_step * max(1.0, abs(x))


def partial_derivatives(
    func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, fd_step: float
) -> np.ndarray:
    """Stack of partials of ``func`` at ``x``; axis 0 indexes the coordinate.

    For ``func`` returning shape S the result has shape ``(len(x),) + S``.
    """
    x = np.asarray(x, dtype=float)
    partials = []
    for k in range(x.size):
        h = coordinate_step(x[k], fd_step)
        acc = None
        for offset, weight in zip(_OFFSETS, _WEIGHTS):
            shifted = x.copy()
            shifted[k] += offset * h
            term = weight * np.asarray(func(shifted), dtype=float)
            acc = term if acc is None else acc + term
        partials.append(acc / (12.0 * h))
    return np.stack(partials)


def jacobian(
    func: Callable[[np.ndarray], np.ndarray], x: np.ndarray, fd_step: float
) -> np.ndarray:
    """Jacobian [d func^i / d x^k] of a vector-valued ``func`` (rows i)."""
    return partial_derivatives(func, x, fd_step).T

