from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

import numpy as np

# Callables on a coordinate chart. Configurations and velocities are 1-D float arrays.
Configuration = np.ndarray
ArrayFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class MetricField:
    """Kinetic-energy metric G(q) on an n-dimensional chart."""

    dim: int  # n, configuration-space dimension
    value_at: ArrayFn  # q -> symmetric positive-definite n x n array
    partials_at: Optional[ArrayFn] = None  # q -> (n, n, n) array, [k] = dG/dq^k
    fd_step: float = 1e-5  # relative finite-difference step


@dataclass(frozen=True)
class ChristoffelData:
    """Christoffel symbols of the Levi-Civita connection at one configuration."""

    coeffs: np.ndarray  # (n, n, n), coeffs[i, j, k] = Gamma^i_jk

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]


@dataclass(frozen=True)
class TensorField11:
    """A (1,1)-tensor field such as a projection, stored as an n x n matrix field."""

    value_at: ArrayFn
    partials_at: Optional[ArrayFn] = None  # q -> (n, n, n), [k] = dA/dq^k
    fd_step: float = 1e-5


@dataclass(frozen=True)
class VectorField:
    value_at: ArrayFn
    jacobian_at: Optional[ArrayFn] = None  # q -> [dY^i/dq^k], rows i
    fd_step: float = 1e-5


@dataclass(frozen=True)
class BundleMap:
    """Fiber-preserving map h(q, w) on the tangent bundle.

    ``analytic_partials(q, w)`` returns ``(dh/dq, dh/dw)`` as n x n arrays with
    rows indexing the output component.
    """

    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    analytic_partials: Optional[
        Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]
    ] = None
    fd_step: float = 1e-5


@dataclass(frozen=True)
class PotentialField:
    value_at: Callable[[np.ndarray], float]
    gradient_at: Optional[ArrayFn] = None  # q -> covector dV
    fd_step: float = 1e-5


@dataclass(frozen=True)
class ConstraintSet:
    """Linear velocity constraints A(q) v = 0."""

    m: int  # number of independent one-forms
    A_at: ArrayFn  # q -> m x n array of one-form coefficients
    D_frame_at: Optional[ArrayFn] = None  # q -> n x (n - m) smooth frame of D
    partials_at: Optional[ArrayFn] = None  # q -> (n, m, n), [k] = dA/dq^k
    fd_step: float = 1e-5


@dataclass(frozen=True)
class FrictionSpec:
    mu_at: ArrayFn  # q -> m x m symmetric positive-definite friction coefficients (kg/s)
    epsilon: float  # time-scale ratio; the physical friction is mu / epsilon


@dataclass(frozen=True)
class ProjectionPair:
    """G-orthogonal projections and the friction inverse at one configuration."""

    P: np.ndarray  # onto D along D-perp
    P_perp: np.ndarray  # onto D-perp along D
    D_frame: np.ndarray  # n x (n - m), columns span D
    Dperp_frame: np.ndarray  # n x m, W = G^-1 A^T
    Q: np.ndarray  # inverse of FR_sharp on D-perp, zero on D
    FR_sharp: np.ndarray  # G^-1 A^T mu A


@dataclass(frozen=True)
class SystemDef:
    """Assembled mechanical system: metric, potential, constraints and friction."""

    name: str
    dim: int
    metric: MetricField
    potential: PotentialField
    constraints: ConstraintSet
    friction: FrictionSpec
    coordinates: Tuple[str, ...] = ()  # column names for exported trajectories
    oracle: Optional[Any] = None  # closed-form reference, when one exists

    @property
    def epsilon(self) -> float:
        return self.friction.epsilon

    def with_epsilon(self, epsilon: float) -> "SystemDef":
        friction = replace(self.friction, epsilon=epsilon)
        oracle = self.oracle.with_epsilon(epsilon) if self.oracle is not None else None
        return replace(self, friction=friction, oracle=oracle)

    def coordinate_names(self) -> Tuple[str, ...]:
        if self.coordinates:
            return self.coordinates
        return tuple(f"q{i}" for i in range(self.dim))


@dataclass(frozen=True)
class DiskParams:
    """Vertical rolling disk parameters (SI units)."""

    m: float  # mass (kg)
    I: float  # planar moment of inertia about the vertical axis (kg m^2)
    J: float  # moment of inertia about the rolling axis (kg m^2)
    R: float  # radius (m)
    mu: float  # lateral/longitudinal friction coefficient (kg/s)
    epsilon: float  # time-scale ratio

    @property
    def inertia_ratio(self) -> float:
        """mR^2 / (J + mR^2), in (0, 1)."""
        return self.m * self.R**2 / (self.J + self.m * self.R**2)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "I": self.I,
            "J": self.J,
            "R": self.R,
            "mu": self.mu,
            "epsilon": self.epsilon,
        }


@dataclass(frozen=True)
class State:
    t: float  # time (s)
    q: np.ndarray  # configuration coordinates
    v: np.ndarray  # velocity coordinates

    def to_dict(self) -> Dict[str, Any]:
        return {"t": self.t, "q": self.q.tolist(), "v": self.v.tolist()}


@dataclass(frozen=True)
class SimPlan:
    model: str  # "full" | "zeroth" | "first"
    dt: float  # maximal step (s)
    t_final: float  # horizon (s)
    epsilon: float
    record_every: int = 1
    transient_skip: float = 0.0  # discarded before error metrics (s)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "model": self.model,
            "dt": self.dt,
            "t_final": self.t_final,
            "epsilon": self.epsilon,
            "record_every": self.record_every,
            "transient_skip": self.transient_skip,
        }


@dataclass(frozen=True)
class Trajectory:
    """Recorded samples of an integration, stored column-wise."""

    times: np.ndarray  # (N,)
    q: np.ndarray  # (N, n)
    v: np.ndarray  # (N, n)

    def __len__(self) -> int:
        return len(self.times)

    def __iter__(self) -> Iterator[State]:
        for i in range(len(self.times)):
            yield self.state(i)

    def state(self, index: int) -> State:
        return State(t=float(self.times[index]), q=self.q[index], v=self.v[index])

    @property
    def final(self) -> State:
        return self.state(len(self.times) - 1)


@dataclass
class InvariantResult:
    """Measured defect of one invariant against its tolerance."""

    name: str
    suite: str  # module the invariant belongs to
    defect: float
    tolerance: float
    detail: str = ""

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.defect)) and self.defect <= self.tolerance

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "suite": self.suite,
            "defect": self.defect,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "detail": self.detail,
        }


@dataclass
class ConvergencePoint:
    """One (epsilon, order) cell of a sweep."""

    epsilon: float
    order: str  # "0", "1" or "full"
    error: Optional[float] = None  # sup-norm configuration error vs. the full model
    error_message: Optional[str] = None

    @property
    def is_successful(self) -> bool:
        return self.error is not None and self.error_message is None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "order": self.order,
            "error": self.error,
            "error_message": self.error_message,
        }


@dataclass
class SlopeFit:
    """Least-squares line through (log epsilon, log error)."""

    order: str
    slope: Optional[float]
    intercept: Optional[float]
    residual: Optional[float]  # RMS of log-space residuals
    epsilons: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "order": self.order,
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "epsilons": list(self.epsilons),
        }


@dataclass
class RunReport:
    """Outcome of one CLI command."""

    command: str
    config_digest: str
    outputs: List[str] = field(default_factory=list)  # every emitted file
    summary: Dict[str, Any] = field(default_factory=dict)
    flags: Dict[str, bool] = field(default_factory=dict)  # pass/fail per check
    errors: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.errors and all(self.flags.values())

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "config_digest": self.config_digest,
            "outputs": list(self.outputs),
            "summary": self.summary,
            "flags": dict(self.flags),
            "errors": list(self.errors),
            "passed": self.passed,
        }


# Model selectors understood by dynamics and the sweep runner
MODELS = ("full", "zeroth", "first")

# Maximal slip order carried by the initial state of each model
MODEL_SLIP_ORDER = {"full": 2, "first": 1, "zeroth": 0}

# Explicit RK4 stability guard for the full model: dt <= epsilon / STIFFNESS_RATIO
STIFFNESS_RATIO = 20.0

# Condition-number guard on every solve in the projection construction
CONDITION_LIMIT = 1e12

# Expected log-log slopes (value, half-width) of sweep errors per reduced model
EXPECTED_SLOPES = {
    "0": (1.0, 0.2),
    "1": (2.0, 0.3),
}

# Expected slope of the generating residual for the order-2 truncation
RESIDUAL_SLOPE = (3.0, 0.3)

# Invariant tolerances
TOLERANCES = {
    "projection": 1e-10,
    "oracle_projection": 1e-10,
    "oracle_slip_analytic": 1e-8,
    "oracle_slip_fd": 1e-5,
    "range": 1e-9,
    "christoffel_symmetry": 1e-10,
    "metric_compatibility_fd": 1e-6,
    "metric_compatibility_analytic": 1e-10,
    "force_equivalence": 1e-8,
    "printed_matrices": 1e-12,
    "energy_conservation": 1e-8,
    "constraint_tangency": 1e-7,
    "energy_monotonicity": 1e-9,
    "attractivity": 1e-6,
    "conserved_heading_rate": 1e-10,
    "circle": 1e-6,
    "vertical_jacobian": 1e-6,
    "section_consistency": 1e-6,
    "chain_rule": 1e-8,
    "energy_balance": 1e-6,
}
