"""
Slip Tool Exceptions

Structured exception hierarchy for the geometry, constraint, approximation,
integration and configuration layers. Everything inherits from SlipToolError
so callers (the CLI in particular) can catch the whole family at once.
"""

from typing import Optional


class SlipToolError(RuntimeError):
    """Base exception for all nonholonomic-slip-tool errors."""

    pass


class GeometryError(SlipToolError):
    """Riemannian computation error."""

    pass


class SingularMetric(GeometryError):
    """Metric failed the symmetric positive-definite factorization.

    Raised when:
    - G(q) has a non-positive eigenvalue
    - G(q) is not symmetric (validation builds)
    """

    pass


class DimensionMismatch(GeometryError):
    """Array shapes disagree with the configuration-space dimension."""

    pass


class ConstraintError(SlipToolError):
    """Constraint distribution or projection construction error."""

    pass


class RankDeficientConstraints(ConstraintError):
    """Constraint one-forms are not linearly independent at q."""

    pass


class IllConditionedFrame(ConstraintError):
    """A solve in the projection construction exceeded the condition guard.

    Raised when:
    - the adapted frame [S | W] is nearly singular
    - the friction block on the complement is nearly singular
    - the friction operator fails to be block diagonal in the adapted frame
    """

    pass


class ApproximationError(SlipToolError):
    """Slow-manifold approximation error."""

    pass


class UnsupportedOrder(ApproximationError):
    """Requested slip truncation order is outside {0, 1, 2}."""

    pass


class IntegrationError(SlipToolError):
    """Time integration error."""

    pass


class StepTooLargeForStiffness(IntegrationError):
    """Full-model step exceeds the explicit stability guard dt <= epsilon/20."""

    pass


class NonFiniteState(IntegrationError):
    """Integrated state contains NaN or infinite entries."""

    pass


class ConfigurationError(SlipToolError):
    """Configuration or user input validation error."""

    pass


class SchemaError(ConfigurationError):
    """Configuration tree does not match the schema.

    The dotted path of the offending key is kept on ``path`` and is the
    exception message, e.g. ``SchemaError("system.kind")``.
    """

    def __init__(self, path: str, reason: Optional[str] = None):
        self.path = path
        self.reason = reason
        super().__init__(path if reason is None else f"{path}: {reason}")


class InvalidParams(ConfigurationError):
    """Physical or numerical parameters are out of range."""

    pass


class ValidationFailure(SlipToolError):
    """An invariant suite measured a defect above its tolerance."""

    def __init__(self, invariant: str, defect: float, tolerance: float):
        self.invariant = invariant
        self.defect = defect
        self.tolerance = tolerance
        super().__init__(
            f"{invariant}: defect {defect:.3e} exceeds tolerance {tolerance:.1e}"
        )
