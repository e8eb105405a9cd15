"""Desk-scale laboratory for viscous and ideal 2D MHD over a wall.

Solves compressible, non-resistive, viscous MHD with a transverse background
field on a periodic, wall-bounded strip, measures solutions in conormal
Sobolev norms, checks the structural identities behind the normal-derivative
estimates, and sweeps the viscosity scale toward the ideal limit.
"""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("conormal-mhd")
except PackageNotFoundError:  # pragma: no cover
    __version__ = "uninstalled"

from ._commutators import (
    CommutatorTable,
    commutator_table,
    smooth_test_field,
    verify_all,
    verify_commutator,
)
from ._config import (
    ConfigError,
    SweepConfig,
    config_from_dict,
    config_to_dict,
    parse_config,
    reference_config,
)
from ._conormal import (
    ConormalImages,
    EnergyAccumulator,
    MultiIndex,
    NormReport,
    TimeRing,
    apply_multi,
    apply_zy,
    conormal_l2,
    conormal_sup,
    energy_Nm,
    initial_norm,
    multi_indices,
    phi_prime,
    phi_weight,
)
from ._diagnostics import (
    b1_rearrangement_defect,
    evaluate_residuals,
    induction_residual_b1,
    residual_div_identity,
    residual_dyb1,
    residual_dyp,
    residual_dyv1,
    residual_dyv2,
    wall_trace_drift,
)
from ._dynamics import (
    RhsBundle,
    Solver,
    SolverAbort,
    Stabilization,
    StepControl,
    cfl,
    div_b,
    div_b_max,
    ideal_rhs,
    induction_emf,
    lorentz_force,
    viscous_rhs,
)
from ._experiments import (
    RateFit,
    RunResult,
    SweepFailed,
    SweepResult,
    fit_rate,
    gap_series,
    run_single,
    run_sweep,
)
from ._global import (
    get_solver,
    iter_processors,
    mark_processor,
    mark_solver,
    process,
    register,
    register_processor,
    register_solver,
)
from ._grid import Grid, GridSpec, build_grid
from ._mms import ManufacturedSolution, MmsForcing, MmsResult, mms_forcing, run_mms
from ._probes import probe_embedding, probe_product_inequality, probe_suite
from ._state import (
    InitialDataSpec,
    InitialMode,
    PhysicalParams,
    State,
    equilibrium,
    make_initial,
    pressure,
    read_field_dump,
    write_field_dump,
)
from ._store import Store

__all__ = [
    "CommutatorTable",
    "ConfigError",
    "ConormalImages",
    "EnergyAccumulator",
    "Grid",
    "GridSpec",
    "InitialDataSpec",
    "InitialMode",
    "ManufacturedSolution",
    "MmsForcing",
    "MmsResult",
    "MultiIndex",
    "NormReport",
    "PhysicalParams",
    "RateFit",
    "RhsBundle",
    "RunResult",
    "Solver",
    "SolverAbort",
    "Stabilization",
    "State",
    "StepControl",
    "Store",
    "SweepConfig",
    "SweepFailed",
    "SweepResult",
    "TimeRing",
    "apply_multi",
    "apply_zy",
    "b1_rearrangement_defect",
    "build_grid",
    "cfl",
    "commutator_table",
    "config_from_dict",
    "config_to_dict",
    "conormal_l2",
    "conormal_sup",
    "div_b",
    "div_b_max",
    "energy_Nm",
    "equilibrium",
    "evaluate_residuals",
    "fit_rate",
    "gap_series",
    "get_solver",
    "ideal_rhs",
    "induction_emf",
    "induction_residual_b1",
    "initial_norm",
    "iter_processors",
    "lorentz_force",
    "make_initial",
    "mark_processor",
    "mark_solver",
    "mms_forcing",
    "multi_indices",
    "parse_config",
    "phi_prime",
    "phi_weight",
    "pressure",
    "probe_embedding",
    "probe_product_inequality",
    "probe_suite",
    "process",
    "read_field_dump",
    "reference_config",
    "register",
    "register_processor",
    "register_solver",
    "residual_div_identity",
    "residual_dyb1",
    "residual_dyp",
    "residual_dyv1",
    "residual_dyv2",
    "run_mms",
    "run_single",
    "run_sweep",
    "smooth_test_field",
    "verify_all",
    "verify_commutator",
    "viscous_rhs",
    "wall_trace_drift",
]
