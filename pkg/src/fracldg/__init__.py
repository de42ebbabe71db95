"""Local discontinuous Galerkin solvers for distributed-order time, Riesz space fractional problems."""

from ._accel import HAVE_NUMBA, backend
from .dg_core import (
    Basis,
    Mesh1D,
    ModalField,
    build_mesh,
    eval_field,
    get_basis,
    l2_error,
    project_l2,
)
from .errors import (
    AssemblyFailure,
    FracLDGError,
    InvalidArgument,
    InvalidData,
    InvalidManufacturedSolution,
    InvalidWeight,
    NonlinearDivergence,
    SolverFailure,
)
from .frac_space import (
    FracOrder,
    FracSpaceOperators,
    assemble_ldg_derivatives,
    assemble_riesz_gram,
    build_operators,
    frac_laplacian_apply,
    riesz_integral,
)
from .frac_time import (
    DistOrderScheme,
    WeightFunction,
    apply_scalar,
    build_dist_order_scheme,
    caputo_l1_apply,
    history_rhs,
)
from .harness import ErrorRow, ErrorTable, RunSpec, emit_table, estimate_order, read_csv, run_sweep
from .manufactured import (
    ManufacturedCase,
    dist_order_of_t2,
    exact_solution,
    forcing,
    frac_laplacian_poly,
    make_case,
)
from .solvers import (
    EquationSpec,
    LaxFriedrichs,
    SolverState,
    init_state,
    run,
    step_convection_diffusion,
    step_coupled_nls,
    step_diffusion,
    step_nls,
)

__version__ = "0.1.0"
