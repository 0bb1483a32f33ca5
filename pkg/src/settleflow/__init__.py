"""Numerical engine for a coupled dispersal and settlement population model.

The model tracks a diffusing disperser density on an interval together with
an age-structured settled density.  Settlers are recruited from dispersers,
age under density-dependent mortality, and feed new dispersers back through
an age-weighted birth rate.  This package provides the rate-law algebra, the
time stepper, spectral threshold quantities, steady-state solvers, and a set
of long-run behaviour checks, plus a small CLI on top.
"""

from .equilibrium import EquilibriumReport, H_map, positive_equilibrium, solve_fkpp
from .errors import (
    BlowupError,
    BracketError,
    ConfigError,
    ConvergenceError,
    EngineError,
    GateError,
    NumericalError,
    SeamError,
    TailMassError,
)
from .grid import Discretization, build_grid, integrate_x
from .rates import (
    AgeProfile,
    AssumptionReport,
    DensityResponse,
    ModelParams,
    RateLaw,
    SpatialField,
    audit_assumptions,
    birth_kernel,
    cumulative_mortality,
    population_ceilings,
    presence_kernel,
)
from .solver import (
    PopulationState,
    Trajectory,
    characteristic_oracle,
    initial_state,
    p_balance_residual,
    recruitment_field,
    simulate,
    step,
    total_population,
)
from .spectral import (
    SpectralReport,
    compute_r0,
    eigenfunction_pair,
    growth_bound,
    kernel_K,
    principal_eigenvalue,
    r0_via_eigenproblem,
    spectral_report,
)
from .verify import (
    SuperSubPair,
    VerdictReport,
    build_super_sub,
    check_bounds,
    check_comparison,
    check_extinction,
    check_persistence_and_convergence,
    run_suite,
)

__version__ = "0.1.0"

__all__ = [
    "AgeProfile",
    "AssumptionReport",
    "BlowupError",
    "BracketError",
    "ConfigError",
    "ConvergenceError",
    "DensityResponse",
    "Discretization",
    "EngineError",
    "EquilibriumReport",
    "GateError",
    "H_map",
    "ModelParams",
    "NumericalError",
    "PopulationState",
    "RateLaw",
    "SeamError",
    "SpatialField",
    "SpectralReport",
    "SuperSubPair",
    "TailMassError",
    "Trajectory",
    "VerdictReport",
    "audit_assumptions",
    "birth_kernel",
    "build_grid",
    "build_super_sub",
    "characteristic_oracle",
    "check_bounds",
    "check_comparison",
    "check_extinction",
    "check_persistence_and_convergence",
    "compute_r0",
    "cumulative_mortality",
    "eigenfunction_pair",
    "growth_bound",
    "initial_state",
    "integrate_x",
    "kernel_K",
    "p_balance_residual",
    "population_ceilings",
    "positive_equilibrium",
    "presence_kernel",
    "principal_eigenvalue",
    "r0_via_eigenproblem",
    "recruitment_field",
    "run_suite",
    "simulate",
    "solve_fkpp",
    "spectral_report",
    "step",
    "total_population",
    "__version__",
]
