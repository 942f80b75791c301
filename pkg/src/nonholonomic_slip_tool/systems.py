"""
Built-in Systems

The vertical rolling disk with its closed-form reference (projections,
friction operator, slip velocities, reduced accelerations) and the loader that
turns configuration trees into SystemDef values.

Disk coordinates are q = (theta, x, y, phi): heading, contact point and
rolling angle. The metric diag(I, m, m, J) is flat, so every Christoffel
symbol vanishes.
"""

import logging
from dataclasses import dataclass, replace
from typing import Any, Mapping, Tuple, Union

import numpy as np

from .config import RunConfig
from .constraints import distribution_frame
from .exceptions import InvalidParams, SchemaError
from .types import (
    BundleMap,
    ConstraintSet,
    DiskParams,
    FrictionSpec,
    MetricField,
    PotentialField,
    SystemDef,
)

logger = logging.getLogger(__name__)

DISK_KIND = "vertical-disk"
DISK_COORDINATES = ("theta", "x", "y", "phi")
DISK_PARAM_NAMES = ("m", "I", "J", "R", "mu")


@dataclass(frozen=True)
class DiskOracle:
    """Closed-form quantities of the vertical rolling disk.

    The second-order slip and the first-order acceleration correction use
    re-derived signs; see DESIGN.md.
    """

    params: DiskParams
    analytic_partials: bool = True  # hand h1 partials to the generic pipeline

    def with_epsilon(self, epsilon: float) -> "DiskOracle":
        return replace(self, params=replace(self.params, epsilon=epsilon))

    @property
    def slip_gain(self) -> float:
        """mR / mu."""
        return self.params.m * self.params.R / self.params.mu

    def projection(self, theta: float) -> np.ndarray:
        p = self.params
        ratio = p.inertia_ratio
        c, s = np.cos(theta), np.sin(theta)
        k = p.J / (p.m * p.R)
        return ratio * np.array(
            [
                [1.0 / ratio, 0.0, 0.0, 0.0],
                [0.0, c**2, 0.5 * np.sin(2 * theta), k * c],
                [0.0, 0.5 * np.sin(2 * theta), s**2, k * s],
                [0.0, c / p.R, s / p.R, p.J / (p.m * p.R**2)],
            ]
        )

    def perp_projection(self, theta: float) -> np.ndarray:
        p = self.params
        c, s = np.cos(theta), np.sin(theta)
        mR2 = p.m * p.R**2
        k = p.J / (p.m * p.R)
        return p.inertia_ratio * np.array(
            [
                [0.0, 0.0, 0.0, 0.0],
                [0.0, (p.J + mR2 * s**2) / mR2, -0.5 * np.sin(2 * theta), -k * c],
                [0.0, -0.5 * np.sin(2 * theta), (p.J + mR2 * c**2) / mR2, -k * s],
                [0.0, -c / p.R, -s / p.R, 1.0],
            ]
        )

    def friction_matrix(self, theta: float) -> np.ndarray:
        p = self.params
        c, s = np.cos(theta), np.sin(theta)
        a, b = p.mu / p.m, p.mu * p.R / p.J
        return np.array(
            [
                [0.0, 0.0, 0.0, 0.0],
                [0.0, a, 0.0, -a * p.R * c],
                [0.0, 0.0, a, -a * p.R * s],
                [0.0, -b * c, -b * s, b * p.R],
            ]
        )

    def constrained_velocity(self, theta: float, v_theta: float, v_phi: float) -> np.ndarray:
        R = self.params.R
        return np.array([v_theta, R * np.cos(theta) * v_phi, R * np.sin(theta) * v_phi, v_phi])

    def h1(self, q: np.ndarray, w: np.ndarray) -> np.ndarray:
        """(mR/mu) w_theta w_phi (0, sin theta, -cos theta, 0)."""
        theta = q[0]
        amp = self.slip_gain * w[0] * w[3]
        return amp * np.array([0.0, np.sin(theta), -np.cos(theta), 0.0])

    def h1_partials(self, q: np.ndarray, w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        theta = q[0]
        direction = np.array([0.0, np.sin(theta), -np.cos(theta), 0.0])
        dq = np.zeros((4, 4))
        dq[:, 0] = self.slip_gain * w[0] * w[3] * np.array([0.0, np.cos(theta), np.sin(theta), 0.0])
        dw = np.zeros((4, 4))
        dw[:, 0] = self.slip_gain * w[3] * direction
        dw[:, 3] = self.slip_gain * w[0] * direction
        return dq, dw

    def h1_map(self) -> BundleMap:
        return BundleMap(eval=self.h1, analytic_partials=self.h1_partials)

    def _rolling_direction(self, theta: float) -> np.ndarray:
        p = self.params
        return np.array([0.0, np.cos(theta), np.sin(theta), -p.m * p.R / p.J])

    def h2(self, q: np.ndarray, w: np.ndarray) -> np.ndarray:
        """-m^2 R J^2 / (mu^2 (J + mR^2)^2) w_theta^2 w_phi (0, cos, sin, -mR/J)."""
        p = self.params
        coeff = -(p.m**2 * p.R * p.J**2) / (p.mu**2 * (p.J + p.m * p.R**2) ** 2)
        return coeff * w[0] ** 2 * w[3] * self._rolling_direction(q[0])

    def slip(self, q: np.ndarray, w: np.ndarray, order: int) -> np.ndarray:
        eps = self.params.epsilon
        result = np.zeros(4)
        if order >= 1:
            result = result + eps * self.h1(q, w)
        if order >= 2:
            result = result + eps**2 * self.h2(q, w)
        return result

    def zeroth_acceleration(self, q: np.ndarray, v: np.ndarray) -> np.ndarray:
        theta, R = q[0], self.params.R
        product = v[0] * v[3]
        return np.array([0.0, -R * np.sin(theta) * product, R * np.cos(theta) * product, 0.0])

    def first_acceleration(self, q: np.ndarray, v: np.ndarray) -> np.ndarray:
        p = self.params
        coeff = p.m * p.R * p.J / (p.mu * (p.J + p.m * p.R**2))
        correction = coeff * v[0] ** 2 * v[3] * self._rolling_direction(q[0])
        return self.zeroth_acceleration(q, v) + p.epsilon * correction

    def first_velocity(self, q: np.ndarray, v: np.ndarray) -> np.ndarray:
        vD = self.constrained_velocity(q[0], v[0], v[3])
        return vD + self.params.epsilon * self.h1(q, vD)

    def lagrange_multiplier(self, q: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Reaction for V = 0; on a flat metric it is the whole zeroth-order acceleration."""
        return self.zeroth_acceleration(q, v)


def check_disk_params(p: DiskParams) -> DiskParams:
    for name, value in p.to_dict().items():
        if not np.isfinite(value) or value <= 0.0:
            raise InvalidParams(f"disk parameter {name} must be positive, got {value}")
    return p


def disk_system(
    p: DiskParams, analytic_partials: bool = True, fd_step: float = 1e-5
) -> SystemDef:
    """Vertical rolling disk with its closed-form reference attached.

    Args:
        p: Disk parameters, all strictly positive
        analytic_partials: Supply exact partials of G, A and h1; otherwise
            every derivative comes from finite differences
        fd_step: Relative finite-difference step

    Raises:
        InvalidParams: If any parameter is non-positive
    """
    check_disk_params(p)
    G = np.diag([p.I, p.m, p.m, p.J])
    zero_partials = np.zeros((4, 4, 4))

    def constraint_at(q: np.ndarray) -> np.ndarray:
        c, s = np.cos(q[0]), np.sin(q[0])
        return np.array([[0.0, 1.0, 0.0, -p.R * c], [0.0, 0.0, 1.0, -p.R * s]])

    def constraint_partials_at(q: np.ndarray) -> np.ndarray:
        c, s = np.cos(q[0]), np.sin(q[0])
        dA = np.zeros((4, 2, 4))
        dA[0] = [[0.0, 0.0, 0.0, p.R * s], [0.0, 0.0, 0.0, -p.R * c]]
        return dA

    def frame_at(q: np.ndarray) -> np.ndarray:
        c, s = np.cos(q[0]), np.sin(q[0])
        return np.array([[1.0, 0.0], [0.0, p.R * c], [0.0, p.R * s], [0.0, 1.0]])

    metric = MetricField(
        dim=4,
        value_at=lambda q: G.copy(),
        partials_at=(lambda q: zero_partials.copy()) if analytic_partials else None,
        fd_step=fd_step,
    )
    potential = PotentialField(
        value_at=lambda q: 0.0,
        gradient_at=(lambda q: np.zeros(4)) if analytic_partials else None,
        fd_step=fd_step,
    )
    constraints = ConstraintSet(
        m=2,
        A_at=constraint_at,
        D_frame_at=frame_at,
        partials_at=constraint_partials_at if analytic_partials else None,
        fd_step=fd_step,
    )
    friction = FrictionSpec(mu_at=lambda q: p.mu * np.eye(2), epsilon=p.epsilon)
    logger.debug("built %s system %s (analytic partials: %s)", DISK_KIND, p, analytic_partials)
    return SystemDef(
        name=DISK_KIND,
        dim=4,
        metric=metric,
        potential=potential,
        constraints=constraints,
        friction=friction,
        coordinates=DISK_COORDINATES,
        oracle=DiskOracle(params=p, analytic_partials=analytic_partials),
    )


def disk_params_from_config(config: RunConfig) -> DiskParams:
    params = config.system.params
    for name in DISK_PARAM_NAMES:
        if name not in params:
            raise SchemaError(f"system.params.{name}", "required")
    for name in params:
        if name not in DISK_PARAM_NAMES + ("epsilon",):
            raise SchemaError(f"system.params.{name}", "unknown key")
    return DiskParams(epsilon=config.epsilon, **{name: params[name] for name in DISK_PARAM_NAMES})


def load_system(config_tree: Union[RunConfig, Mapping[str, Any]]) -> SystemDef:
    """Build the SystemDef described by a configuration tree.

    Raises:
        SchemaError: Missing or malformed keys, unknown ``system.kind``
        InvalidParams: Out-of-range parameters
    """
    config = config_tree if isinstance(config_tree, RunConfig) else RunConfig.from_dict(config_tree)
    kind = config.system.kind
    if kind != DISK_KIND:
        raise SchemaError("system.kind", f"unknown system kind {kind!r}")
    return disk_system(
        disk_params_from_config(config),
        analytic_partials=config.system.analytic_partials,
        fd_step=config.system.fd_step,
    )


def initial_configuration_and_velocity(
    system: SystemDef, config: RunConfig
) -> Tuple[np.ndarray, np.ndarray]:
    """(q0, v_D0) from the ``initial`` section; velocity given in the D frame."""
    q0 = np.asarray(config.initial.configuration(), dtype=float)
    if q0.shape != (system.dim,):
        raise SchemaError("initial", f"expected {system.dim} configuration coordinates")
    S = distribution_frame(system.constraints, q0)
    coords = np.asarray(config.initial.frame_coordinates(), dtype=float)
    if coords.shape != (S.shape[1],):
        raise SchemaError("initial.d_velocity", f"expected {S.shape[1]} frame coordinates")
    return q0, S @ coords
