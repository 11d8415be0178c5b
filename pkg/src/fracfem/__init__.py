"""FEM solvers for two-point boundary value problems with a leading
Riemann-Liouville fractional derivative of order alpha in (1, 2).

The package provides the standard Galerkin method and a singularity
reconstruction method that splits off the leading x^(alpha-1) (or, for
mixed conditions, x^(alpha-2)) profile, together with the convergence-study
tooling used to verify both.
"""

from .analysis import (
    ConvergenceReport,
    ErrorNorms,
    ExactSolution,
    error_norms,
    exact_q0,
    expected_rates,
    green_q0,
    rates,
    reference_solution,
)
from .assembly import (
    AssembledSystem,
    ProblemSpec,
    SingularPair,
    assemble_lead,
    assemble_mass_q,
    assemble_system,
    build_singular_pair,
    lead_stencil,
)
from .cli import ExperimentConfig, emit_table, run_experiment
from .errors import (
    ArgumentError,
    DegenerateSplittingError,
    DomainError,
    FracFemError,
    IterativeFailure,
    QuadratureFailure,
    SingularSystemError,
    UnsupportedFormError,
    UnsupportedSourceError,
)
from .fields import ScalarField, parse_field
from .fraccalc import (
    FracOrder,
    PowerSum,
    PowerTerm,
    QuadratureRule,
    beta_fn,
    gamma_fn,
    rl_derivative_power,
    rl_integral_power,
    rl_integral_powersum,
    rl_integral_powersum_at,
    weighted_endpoint_integral,
)
from .mesh import Mesh, PwLinear, basis_frac_derivative, build_mesh, hat
from .solver import (
    ReconSolution,
    StandardSolution,
    solve_iterative,
    solve_reconstruction,
    solve_standard,
    system_matvec,
    toeplitz_matvec,
)

__version__ = "0.1.0"
