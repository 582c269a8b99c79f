"""Matrix-free FFT solver for integral (nonlocal) Laplace problems on uniform grids."""

from .bspline import bspline_derivative, bspline_eval
from .kernel import (
    KernelSpec,
    Normalization,
    kernel_from_json,
    kernel_to_json,
    make_kernel,
    second_moment,
)
from .gentensor import (
    GeneratingTensor,
    QuadConfig,
    RadialPanels,
    assemble_generating_tensor,
    classical_generating_tensor,
    closed_form_integrand_2d,
    closed_form_table_2d,
    closed_form_table_3d,
    integrand_fk,
    integrand_fk_polar,
    load_tensor,
    regular_part,
    save_tensor,
    singular_part,
)
from .toeplitz import ToeplitzOperator, build_operator, materialize_dense, smooth_fft_length
from .solver import (
    GridSpec,
    SolveReport,
    apply_operator_direct,
    assemble_rhs,
    convergence_study,
    discrete_l2_error,
    gaussian_solution,
    manufactured_rhs_2d,
    solve_cg,
)

__version__ = "0.1.0"

__all__ = [
    "bspline_eval",
    "bspline_derivative",
    "KernelSpec",
    "Normalization",
    "make_kernel",
    "second_moment",
    "kernel_to_json",
    "kernel_from_json",
    "GeneratingTensor",
    "QuadConfig",
    "RadialPanels",
    "assemble_generating_tensor",
    "classical_generating_tensor",
    "closed_form_integrand_2d",
    "closed_form_table_2d",
    "closed_form_table_3d",
    "integrand_fk",
    "integrand_fk_polar",
    "singular_part",
    "regular_part",
    "save_tensor",
    "load_tensor",
    "ToeplitzOperator",
    "build_operator",
    "materialize_dense",
    "smooth_fft_length",
    "GridSpec",
    "SolveReport",
    "assemble_rhs",
    "solve_cg",
    "apply_operator_direct",
    "gaussian_solution",
    "manufactured_rhs_2d",
    "discrete_l2_error",
    "convergence_study",
    "__version__",
]
