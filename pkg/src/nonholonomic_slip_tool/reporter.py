"""
Simple and lean reporter for trajectories, sweeps and run reports.

CSV numbers use 17 significant digits with '.' decimals regardless of locale;
every file is written to a temporary sibling and moved into place.
"""

import json
import os
import tempfile
from pathlib import Path
from typing import List, Sequence

import numpy as np

from .constraints import perp_projector
from .dynamics import kinetic_energy
from .geometry import metric_value
from .metrics_calculator import g_norm
from .slow_manifold import h1, h2, slip
from .types import ConvergencePoint, RunReport, SystemDef, Trajectory


def format_number(value: float) -> str:
    """Locale-free, round-trippable decimal."""
    return format(float(value), ".17g")


def write_text_atomic(path: Path, text: str) -> Path:
    """Write ``text`` to a temporary file next to ``path`` and rename it over."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return path


def _csv(rows: Sequence[Sequence[str]]) -> str:
    return "".join(",".join(row) + "\n" for row in rows)


def trajectory_header(system: SystemDef) -> List[str]:
    names = list(system.coordinate_names())
    return ["t"] + names + [f"v_{name}" for name in names] + ["ke", "slip_norm"]


def write_trajectory_csv(system: SystemDef, trajectory: Trajectory, output_path: Path) -> Path:
    """t, coordinates, velocities, kinetic energy and ||P-perp v||_G per sample."""
    rows = [trajectory_header(system)]
    for state in trajectory:
        G = metric_value(system.metric, state.q)
        slip_velocity = perp_projector(system.metric, system.constraints, state.q) @ state.v
        values = (
            [state.t]
            + list(state.q)
            + list(state.v)
            + [kinetic_energy(system, state.q, state.v), g_norm(G, slip_velocity)]
        )
        rows.append([format_number(x) for x in values])
    return write_text_atomic(output_path, _csv(rows))


def write_convergence_csv(points: List[ConvergencePoint], output_path: Path) -> Path:
    """epsilon, order, error; failed points leave the error empty."""
    rows = [["epsilon", "order", "error"]]
    for point in points:
        error = format_number(point.error) if point.is_successful else ""
        rows.append([format_number(point.epsilon), point.order, error])
    return write_text_atomic(output_path, _csv(rows))


def slip_csv(system: SystemDef, q: np.ndarray, vD: np.ndarray) -> str:
    """Header and one row: h1, h2 and eps h1 + eps^2 h2 at (q, vD)."""
    names = system.coordinate_names()
    blocks = {
        "h1": h1(system, q, vD),
        "h2": h2(system, q, vD),
        "slip": slip(system, q, vD, 2),
    }
    header = [f"{label}_{name}" for label in blocks for name in names]
    row = [format_number(x) for values in blocks.values() for x in values]
    return _csv([header, row])


def write_json_report(report: RunReport, output_path: Path) -> Path:
    """Write the run report; the report file lists itself among the outputs."""
    output_path = Path(output_path)
    if str(output_path) not in report.outputs:
        report.outputs.append(str(output_path))
    text = json.dumps(report.to_dict(), indent=2, ensure_ascii=False, default=_jsonable)
    return write_text_atomic(output_path, text + "\n")


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def report_path_for(output_path: Path) -> Path:
    """Sidecar report path: results.csv -> results.report.json."""
    output_path = Path(output_path)
    return output_path.with_name(output_path.stem + ".report.json")
