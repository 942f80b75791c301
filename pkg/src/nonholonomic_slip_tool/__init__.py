__version__ = "0.1.0"

# Re-export common API for programmatic use
from .constraints import (
    distribution_frame,
    friction_operator,
    lagrange_multiplier,
    perp_projector,
    projections,
    projector_fields,
    q_map_apply,
)
from .dynamics import (
    dissipation_rate,
    energy_rate,
    first_rhs,
    full_rhs,
    initial_state,
    integrate,
    kinetic_energy,
    simulate,
    total_energy,
    zeroth_rhs,
)
from .geometry import (
    christoffel,
    cov_deriv_tensor,
    cov_deriv_vector,
    flat,
    horizontal_cov_deriv,
    sharp,
    vertical_jacobian,
)
from .slow_manifold import (
    generating_residual,
    h1,
    h2,
    invariance_residual,
    manifold_projection,
    normal_projection,
    slip,
    slip_section,
)
from .studies import (
    batch_compute_convergence,
    compute_convergence_point,
    get_convergence_summary,
    run_simulation,
)
from .systems import DiskOracle, disk_system, load_system

from .cli import main as cli_main
from .config import RunConfig
from .reporter import write_convergence_csv, write_json_report, write_trajectory_csv
from .types import (
    EXPECTED_SLOPES,
    TOLERANCES,
    BundleMap,
    ConstraintSet,
    DiskParams,
    FrictionSpec,
    MetricField,
    PotentialField,
    ProjectionPair,
    RunReport,
    SimPlan,
    State,
    SystemDef,
    Trajectory,
)
from .validation import run_validation


__all__ = [
    "distribution_frame",
    "friction_operator",
    "lagrange_multiplier",
    "perp_projector",
    "projections",
    "projector_fields",
    "q_map_apply",
    "dissipation_rate",
    "energy_rate",
    "first_rhs",
    "full_rhs",
    "initial_state",
    "integrate",
    "kinetic_energy",
    "simulate",
    "total_energy",
    "zeroth_rhs",
    "christoffel",
    "cov_deriv_tensor",
    "cov_deriv_vector",
    "flat",
    "horizontal_cov_deriv",
    "sharp",
    "vertical_jacobian",
    "generating_residual",
    "h1",
    "h2",
    "invariance_residual",
    "manifold_projection",
    "normal_projection",
    "slip",
    "slip_section",
    "batch_compute_convergence",
    "compute_convergence_point",
    "get_convergence_summary",
    "run_simulation",
    "DiskOracle",
    "disk_system",
    "load_system",
    "cli_main",
    "RunConfig",
    "write_convergence_csv",
    "write_json_report",
    "write_trajectory_csv",
    "EXPECTED_SLOPES",
    "TOLERANCES",
    "BundleMap",
    "ConstraintSet",
    "DiskParams",
    "FrictionSpec",
    "MetricField",
    "PotentialField",
    "ProjectionPair",
    "RunReport",
    "SimPlan",
    "State",
    "SystemDef",
    "Trajectory",
    "run_validation",
]
