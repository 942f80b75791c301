import copy
from pathlib import Path

import numpy as np
import pytest
import yaml

from nonholonomic_slip_tool.systems import disk_system
from nonholonomic_slip_tool.types import (
    ConstraintSet,
    DiskParams,
    FrictionSpec,
    MetricField,
    PotentialField,
    SystemDef,
)

DISK_TREE = {
    "system": {
        "kind": "vertical-disk",
        "params": {"m": 1.0, "I": 1.0, "J": 0.5, "R": 1.0, "mu": 1.0},
    },
    "sim": {"epsilon": 0.1, "dt": 0.001, "t_final": 0.1, "model": "zeroth"},
    "initial": {"theta": 0.0, "x": 0.0, "y": 0.0, "phi": 0.0, "v_theta": 1.0, "v_phi": 1.0},
}


@pytest.fixture
def disk_params():
    return DiskParams(m=1.0, I=1.0, J=0.5, R=1.0, mu=1.0, epsilon=0.1)


@pytest.fixture
def disk(disk_params):
    return disk_system(disk_params)


@pytest.fixture
def fd_disk(disk_params):
    return disk_system(disk_params, analytic_partials=False, fd_step=1e-4)


def polar_slope_system(epsilon: float = 0.1, gravity: float = 0.0) -> SystemDef:
    """Point on a helical ramp in coordinates (r, alpha, z).

    Metric diag(1, r^2, 1) has non-vanishing Christoffel symbols; the single
    constraint z' = r alpha' makes D depend on r. With gravity the potential
    g z is given by its value only, so its gradient comes from differences.
    """
    if gravity:
        potential = PotentialField(value_at=lambda q: gravity * q[2])
    else:
        potential = PotentialField(value_at=lambda q: 0.0, gradient_at=lambda q: np.zeros(3))

    def metric_at(q):
        return np.diag([1.0, q[0] ** 2, 1.0])

    def metric_partials_at(q):
        dG = np.zeros((3, 3, 3))
        dG[0, 1, 1] = 2.0 * q[0]
        return dG

    def constraint_at(q):
        return np.array([[0.0, -q[0], 1.0]])

    return SystemDef(
        name="polar-slope",
        dim=3,
        metric=MetricField(dim=3, value_at=metric_at, partials_at=metric_partials_at),
        potential=potential,
        constraints=ConstraintSet(m=1, A_at=constraint_at),
        friction=FrictionSpec(mu_at=lambda q: np.eye(1), epsilon=epsilon),
        coordinates=("r", "alpha", "z"),
    )


@pytest.fixture
def polar_slope():
    return polar_slope_system()


GRAVITY = 9.81


@pytest.fixture
def polar_gravity():
    return polar_slope_system(gravity=GRAVITY)


@pytest.fixture
def disk_tree():
    return copy.deepcopy(DISK_TREE)


@pytest.fixture
def write_config(tmp_path):
    """Write a configuration tree to a YAML file and return its path."""

    def _write(tree, name: str = "config.yaml") -> Path:
        path = tmp_path / name
        path.write_text(yaml.safe_dump(tree), encoding="utf-8")
        return path

    return _write
