"""Nonlinear operators on eigenvalues of the complex Hessian.

Bellman representation F(Hu) = inf over linear elliptic minorants, with a
monotone wide-stencil scheme for the Dirichlet problem, a grid-level
subsolution verifier, and Perron-style envelope constructions.
"""

from .bellman import (
    ControlSet,
    LinearMinorant,
    bellman_argmin,
    bellman_inf,
    build_control_set,
    detect_outside_cone,
    supergradient_minorant,
)
from .calculus import (
    HessianField,
    MollifierKernel,
    build_kernel,
    discrete_complex_hessian,
    hessian_field,
    laplacian_field,
    mollify,
)
from .errors import (
    DomainError,
    EmptyDomainError,
    HypothesisViolation,
    RefinementError,
    ScheduleError,
)
from .grid import (
    Ball,
    Box,
    DomainGrid,
    GridFunction,
    eroded_domain,
    load_csv,
    parse_domain,
    rasterize_domain,
    save_csv,
)
from .hermitian import (
    EigenDecomposition,
    F_eval,
    F_eval_many,
    HermitianMatrix,
    eigen_decompose,
    eigen_values,
    eigvals_2x2_field,
    interior_matrix,
    matrix_in_cone,
    trace_pair,
)
from .solver import (
    SchemeStencil,
    SolveReport,
    SolverConfig,
    SubsolutionSequence,
    approximate_subsolution_sequence,
    build_stencil,
    decreasing_solution_sequence,
    discrete_bellman_operator,
    perron_envelope,
    solve_dirichlet,
)
from .symfunc import (
    AxiomReport,
    ConeSpec,
    OperatorSpec,
    check_f_axioms,
    cone_contains,
    f_eval_many,
    f_gradient_many,
    f_limit_at_infinity,
    hessian_k,
    hessian_quotient,
    monge_ampere,
    parse_spec,
    sample_interior,
    saturated,
    sigma_all,
)
from .verify import (
    VerificationReport,
    check_comparison,
    check_subsolution,
    convex_combination,
    glue_max,
)

__version__ = "0.1.0"
