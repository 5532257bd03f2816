"""Turnpike analysis for boundary-controlled 2x2 linear hyperbolic systems."""

from .errors import *  # noqa: F401,F403
from .system import (
    Certificate,
    ExpWeight,
    Regime,
    SystemSpec,
    build_system,
    certify_decay,
    certify_growth,
    eval_E,
    gen_eig_pair_2x2,
    read_coefficient_table,
    search_weight,
    system_from_table,
)
from .solvers import (
    SpaceTimeGrid,
    adjoint_backward_solve,
    build_grid,
    forward_solve,
    forward_traces,
    grid_for_cfl,
    steady_adjoint_solve,
    steady_solve,
    transpose_traces,
)
from .operators import (
    apply_FT,
    apply_FT_star,
    assemble_static_maps,
    continuous_adjoint_trace,
    inner_product_H,
    norm_H,
    operator_norm,
)
from .optimizer import (
    QuadraticCost,
    cost_from_tracking,
    estimate_kappa,
    eval_J,
    eval_J0,
    grad_dynamic,
    hessian_apply,
    solve_dynamic,
    solve_one_sided,
    solve_static,
)
from .integer import (
    IntegerSpec,
    solve_integer_dynamic,
    solve_integer_static,
    switching_threshold_check,
    total_variation,
)
from .turnpike import (
    EnergyKind,
    control_metric,
    decay_check,
    example1_oracle,
    lyapunov_energy,
    state_metric,
    sweep_and_fit,
)
from .pipeline import (
    PipelineParams,
    build_pipeline_cost,
    linearized_system,
    nonlinear_step,
    run_transition_scenario,
    source_and_jacobian,
    stationary_profile,
)
from .config import RunConfig, dumps_config, load_config, loads_config

__version__ = "0.1.0"
