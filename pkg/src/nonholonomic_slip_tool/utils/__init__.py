from .finite_differences import (
    coordinate_step,
    jacobian,
    partial_derivatives,
)

__all__ = [
    "coordinate_step",
    "jacobian",
    "partial_derivatives",
]
