"""Receding horizon stabilization of time-varying parabolic PDEs with
sparsity-promoting squared-l1 control cost and POD model reduction."""

from .config import RunConfig, parse_config, serialize_config, build_model
from .errors import ConfigError, NumericsError
from .fbs import FbsSettings, OpenLoopSolution, gradient_smooth, solve_open_loop
from .fem import (
    FemModel,
    assemble_control,
    assemble_static,
    assemble_timevarying,
    build_fem_model,
    default_convection,
    default_initial_state,
    default_reaction,
    system_matrix,
)
from .mesh import ActuatorLayout, Mesh, build_mesh, default_layout
from .pod import (
    PodBasis,
    ReducedModel,
    SnapshotSet,
    compute_pod_basis,
    reduce_operators,
    snapshots_from_log,
)
from .prox import ProxParams, find_mu_star, prox_g, prox_trajectory, psi
from .rhc import (
    RhcResult,
    fit_decay_rate,
    reintegration_error,
    run_rhc_fom,
    run_uncontrolled,
)
from .reduced import ErrorSeries, rom_error_report, run_rhc_pod
from .bench import BenchReport, run_benchmark
from .timestepping import eval_cost, integrate_adjoint, integrate_state, mass_norm_series
from .trajectory import TimeGrid, Trajectory, trapezoid_weights

__version__ = "0.1.0"
