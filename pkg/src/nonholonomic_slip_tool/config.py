"""
Run Configuration

YAML configuration trees parsed into typed sections. Unknown keys and wrong
types raise SchemaError carrying the dotted key path; value ranges of physical
parameters are checked by the system builders (InvalidParams).

Example:

    system:
      kind: vertical-disk
      params: {m: 1.0, I: 1.0, J: 0.5, R: 1.0, mu: 1.0}
    sim: {epsilon: 0.01, dt: 0.0002, t_final: 1.0, model: full,
          record_every: 10, transient_skip: 0.1}
    sweep: {epsilons: [0.02, 0.01, 0.005, 0.0025], orders: [0, 1]}
    initial: {theta: 0.0, x: 0.0, y: 0.0, phi: 0.0,
              v_theta: 1.0, v_phi: 1.0, slip_order: 2}
"""

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Union

import yaml

from .exceptions import SchemaError
from .types import MODELS, SimPlan

logger = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.01


def _mapping(tree: Any, path: str) -> Mapping[str, Any]:
    if not isinstance(tree, Mapping):
        raise SchemaError(path, "expected a mapping")
    return tree


def _reject_unknown(tree: Mapping[str, Any], allowed: tuple, path: str) -> None:
    for key in tree:
        if key not in allowed:
            raise SchemaError(f"{path}.{key}" if path else str(key), "unknown key")


def _number(tree: Mapping[str, Any], key: str, path: str, default: Any = ...) -> float:
    if key not in tree or tree[key] is None:
        if default is ...:
            raise SchemaError(f"{path}.{key}", "required")
        return default
    value = tree[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{path}.{key}", "expected a number")
    return float(value)


def _integer(tree: Mapping[str, Any], key: str, path: str, default: Any = ...) -> int:
    if key not in tree or tree[key] is None:
        if default is ...:
            raise SchemaError(f"{path}.{key}", "required")
        return default
    value = tree[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(f"{path}.{key}", "expected an integer")
    return value


@dataclass
class SystemSection:
    kind: str
    params: Dict[str, float]
    fd_step: float = 1e-5
    analytic_partials: bool = True

    @classmethod
    def from_dict(cls, tree: Any, path: str = "system") -> "SystemSection":
        tree = _mapping(tree, path)
        _reject_unknown(tree, ("kind", "params", "fd_step", "analytic_partials"), path)
        kind = tree.get("kind")
        if kind is None:
            raise SchemaError(f"{path}.kind")
        if not isinstance(kind, str):
            raise SchemaError(f"{path}.kind", "expected a string")
        params_tree = _mapping(tree.get("params", {}), f"{path}.params")
        params = {key: _number(params_tree, key, f"{path}.params") for key in params_tree}
        analytic = tree.get("analytic_partials", True)
        if not isinstance(analytic, bool):
            raise SchemaError(f"{path}.analytic_partials", "expected a boolean")
        return cls(
            kind=kind,
            params=params,
            fd_step=_number(tree, "fd_step", path, 1e-5),
            analytic_partials=analytic,
        )


@dataclass
class SimSection:
    epsilon: float = DEFAULT_EPSILON
    dt: float = 1e-4
    t_final: float = 1.0
    model: str = "full"
    record_every: int = 1
    transient_skip: float = 0.0

    @classmethod
    def from_dict(cls, tree: Any, path: str = "sim") -> "SimSection":
        tree = _mapping(tree, path)
        _reject_unknown(
            tree, ("epsilon", "dt", "t_final", "model", "record_every", "transient_skip"), path
        )
        model = tree.get("model", "full")
        if model not in MODELS:
            raise SchemaError(f"{path}.model", f"expected one of {', '.join(MODELS)}")
        return cls(
            epsilon=_number(tree, "epsilon", path, DEFAULT_EPSILON),
            dt=_number(tree, "dt", path, 1e-4),
            t_final=_number(tree, "t_final", path, 1.0),
            model=model,
            record_every=_integer(tree, "record_every", path, 1),
            transient_skip=_number(tree, "transient_skip", path, 0.0),
        )

    def to_plan(self, epsilon: Optional[float] = None) -> SimPlan:
        return SimPlan(
            model=self.model,
            dt=self.dt,
            t_final=self.t_final,
            epsilon=self.epsilon if epsilon is None else epsilon,
            record_every=self.record_every,
            transient_skip=self.transient_skip,
        )


@dataclass
class SweepSection:
    epsilons: List[float] = field(default_factory=list)
    orders: List[str] = field(default_factory=lambda: ["0", "1"])
    dt_over_epsilon: float = 0.02
    skip_over_epsilon: float = 10.0
    t_final: Optional[float] = None  # falls back to sim.t_final

    @classmethod
    def from_dict(cls, tree: Any, path: str = "sweep") -> "SweepSection":
        tree = _mapping(tree, path)
        _reject_unknown(
            tree, ("epsilons", "orders", "dt_over_epsilon", "skip_over_epsilon", "t_final"), path
        )
        epsilons = tree.get("epsilons", [])
        if not isinstance(epsilons, list):
            raise SchemaError(f"{path}.epsilons", "expected a list")
        parsed = [_number({"e": e}, "e", f"{path}.epsilons") for e in epsilons]

        orders = tree.get("orders", [0, 1])
        if not isinstance(orders, list):
            raise SchemaError(f"{path}.orders", "expected a list")
        names = []
        for order in orders:
            name = str(order)
            if isinstance(order, bool) or name not in ("0", "1", "full"):
                raise SchemaError(f"{path}.orders", f"unsupported order {order!r}")
            names.append(name)
        return cls(
            epsilons=parsed,
            orders=names,
            dt_over_epsilon=_number(tree, "dt_over_epsilon", path, 0.02),
            skip_over_epsilon=_number(tree, "skip_over_epsilon", path, 10.0),
            t_final=_number(tree, "t_final", path, None),
        )


@dataclass
class InitialSection:
    theta: float = 0.0
    x: float = 0.0
    y: float = 0.0
    phi: float = 0.0
    v_theta: float = 1.0
    v_phi: float = 1.0
    slip_order: int = 2
    d_velocity: Optional[List[float]] = None  # coordinates in the distribution frame

    @classmethod
    def from_dict(cls, tree: Any, path: str = "initial") -> "InitialSection":
        tree = _mapping(tree, path)
        names = ("theta", "x", "y", "phi", "v_theta", "v_phi")
        _reject_unknown(tree, names + ("slip_order", "d_velocity"), path)
        values = {name: _number(tree, name, path, getattr(cls, name)) for name in names}
        slip_order = _integer(tree, "slip_order", path, 2)
        if slip_order not in (0, 1, 2):
            raise SchemaError(f"{path}.slip_order", "expected 0, 1 or 2")
        d_velocity = tree.get("d_velocity")
        if d_velocity is not None:
            if not isinstance(d_velocity, list):
                raise SchemaError(f"{path}.d_velocity", "expected a list")
            d_velocity = [_number({"c": c}, "c", f"{path}.d_velocity") for c in d_velocity]
        return cls(slip_order=slip_order, d_velocity=d_velocity, **values)

    def configuration(self) -> List[float]:
        return [self.theta, self.x, self.y, self.phi]

    def frame_coordinates(self) -> List[float]:
        if self.d_velocity is not None:
            return list(self.d_velocity)
        return [self.v_theta, self.v_phi]


@dataclass
class ValidateSection:
    samples: int = 100
    seed: int = 0

    @classmethod
    def from_dict(cls, tree: Any, path: str = "validate") -> "ValidateSection":
        tree = _mapping(tree, path)
        _reject_unknown(tree, ("samples", "seed"), path)
        return cls(
            samples=_integer(tree, "samples", path, 100),
            seed=_integer(tree, "seed", path, 0),
        )


@dataclass
class RunConfig:
    """Complete parsed configuration tree."""

    system: SystemSection
    sim: SimSection = field(default_factory=SimSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    initial: InitialSection = field(default_factory=InitialSection)
    validate: ValidateSection = field(default_factory=ValidateSection)

    @classmethod
    def from_dict(cls, tree: Any) -> "RunConfig":
        tree = _mapping(tree, "")
        _reject_unknown(tree, ("system", "sim", "sweep", "initial", "validate"), "")
        if "system" not in tree:
            raise SchemaError("system.kind")
        return cls(
            system=SystemSection.from_dict(tree["system"]),
            sim=SimSection.from_dict(tree.get("sim") or {}),
            sweep=SweepSection.from_dict(tree.get("sweep") or {}),
            initial=InitialSection.from_dict(tree.get("initial") or {}),
            validate=ValidateSection.from_dict(tree.get("validate") or {}),
        )

    @classmethod
    def from_yaml(cls, path: Union[str, Path]) -> "RunConfig":
        return cls.from_dict(load_config_tree(path))

    @property
    def epsilon(self) -> float:
        """Singular parameter: system.params.epsilon when given, else sim.epsilon."""
        return self.system.params.get("epsilon", self.sim.epsilon)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the parsed tree."""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config_tree(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a YAML configuration file into a plain tree."""
    path = Path(path)
    logger.debug("reading configuration %s", path)
    try:
        with path.open("r", encoding="utf-8") as f:
            tree = yaml.safe_load(f)
    except yaml.YAMLError as exc:
        raise SchemaError("<root>", f"invalid YAML: {exc}") from exc
    if tree is None:
        raise SchemaError("system.kind")
    if not isinstance(tree, dict):
        raise SchemaError("<root>", "expected a mapping")
    return tree
