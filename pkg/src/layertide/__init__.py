"""Multilayer rotating shallow-water tides: mixed FEM, midpoint stepping,
and block-preconditioned GMRES."""

from ._kernels import BACKEND as kernel_backend
from .analysis import (
    INFSUP_FLOOR,
    TheoryReport,
    continuity_constant,
    measure_inverse_constant,
    verify_chi_window,
    verify_infsup_continuity,
)
from .fem import (
    BC_NATURAL,
    BC_NORMAL_TRACE_ZERO,
    ScalarField,
    SingleLayerMatrices,
    assemble_perp_mass,
    assemble_single_layer,
    interpolate_rt0,
    rt0_divergence,
)
from .krylov import SolveFailure, SolveReport, gmres, make_solver
from .layers import (
    CouplingInverse,
    LayerStack,
    LdlFactors,
    SpectralBounds,
    coupling_inverse,
    coupling_matrix,
    kron_lift,
    ldlt,
    random_admissible_stack,
    spectral_bounds,
)
from .mesh import Mesh, build_rectangle_mesh, build_unit_square_mesh
from .precond import (
    INNER_EXACT,
    INNER_ILU0,
    INNERS,
    VARIANT_DECOUPLED,
    VARIANT_FULL_ILU0,
    VARIANT_TRIDIAG,
    VARIANT_WEIGHTED,
    VARIANTS,
    Preconditioner,
    build_preconditioner,
    decoupled_c_blocks,
    reform_c_tilde,
    weighted_c_matrix,
)
from .sparse import (
    CsrMatrix,
    DirectFactors,
    FactorizationError,
    Ilu0Factors,
    SingularMatrixError,
    ZeroPivotError,
    direct_factor,
    ilu0_factor,
    read_matrix_market,
    spmv,
    write_matrix_market,
)
from .system import (
    BlockSystem,
    PhysicalParams,
    State,
    assemble_block_system,
    energy,
    export_state_csv,
    initial_disturbance,
    midpoint_rhs,
    midpoint_step,
)

__version__ = "0.1.0"

__all__ = [
    "kernel_backend",
    "Mesh",
    "build_rectangle_mesh",
    "build_unit_square_mesh",
    "CsrMatrix",
    "DirectFactors",
    "FactorizationError",
    "Ilu0Factors",
    "SingularMatrixError",
    "ZeroPivotError",
    "direct_factor",
    "ilu0_factor",
    "read_matrix_market",
    "write_matrix_market",
    "spmv",
    "BC_NATURAL",
    "BC_NORMAL_TRACE_ZERO",
    "ScalarField",
    "SingleLayerMatrices",
    "assemble_perp_mass",
    "assemble_single_layer",
    "interpolate_rt0",
    "rt0_divergence",
    "LayerStack",
    "CouplingInverse",
    "LdlFactors",
    "SpectralBounds",
    "coupling_matrix",
    "coupling_inverse",
    "ldlt",
    "spectral_bounds",
    "random_admissible_stack",
    "kron_lift",
    "BlockSystem",
    "PhysicalParams",
    "State",
    "assemble_block_system",
    "energy",
    "export_state_csv",
    "initial_disturbance",
    "midpoint_rhs",
    "midpoint_step",
    "Preconditioner",
    "build_preconditioner",
    "weighted_c_matrix",
    "decoupled_c_blocks",
    "reform_c_tilde",
    "VARIANTS",
    "VARIANT_FULL_ILU0",
    "VARIANT_WEIGHTED",
    "VARIANT_DECOUPLED",
    "VARIANT_TRIDIAG",
    "INNERS",
    "INNER_EXACT",
    "INNER_ILU0",
    "SolveReport",
    "SolveFailure",
    "gmres",
    "make_solver",
    "TheoryReport",
    "INFSUP_FLOOR",
    "continuity_constant",
    "measure_inverse_constant",
    "verify_chi_window",
    "verify_infsup_continuity",
]
