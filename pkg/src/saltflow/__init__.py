"""saltflow: density-driven groundwater flow with uncertainty quantification.

A desk-scale pipeline for brine intrusion (Elder-type) problems: a
deterministic vertex-centered finite-volume solver for the coupled mass
fraction / pressure system, driven through parametric porosity and
permeability fields, with quasi-Monte Carlo sampling and Legendre
polynomial chaos surrogates for the statistics of the mass fraction.
"""

from .constitutive import FlowParameters, density, kc_scaling_factor, kozeny_carman
from .discretization import (
    CoefficientFields,
    FieldState,
    TransportProblem,
    assemble_jacobian,
    assemble_residual,
    darcy_face_velocity,
    initial_state,
    salt_balance,
)
from .errors import ConfigError, InvalidRealizationError, KrylovError, NewtonError
from .gpc import (
    GpcSurrogate,
    MultiIndexSet,
    approximation_error_report,
    basis_eval,
    build_multiindex_set,
    legendre_eval,
    load_surrogate,
    project,
    save_surrogate,
    surrogate_eval,
    surrogate_mean,
    surrogate_sample_stats,
    surrogate_variance,
)
from .grid import BoxDomain, DirichletPatch, GridTransfer, StructuredGrid, Tag, build_grid
from .quadrature import (
    QuadratureRule,
    clenshaw_curtis_1d,
    gauss_legendre_1d,
    halton,
    monte_carlo,
    smolyak_cc,
    tensor_rule,
)
from .ensemble import (
    EnsembleSetup,
    ScenarioResult,
    ScenarioSpec,
    StatisticsFields,
    compare_fields,
    run_ensemble,
    run_scenario,
    weighted_stats,
)
from .random_fields import PorosityFieldSpec, coefficient_fields, porosity_at
from .solvers import (
    ILU0,
    LinearSolverConfig,
    MgHierarchy,
    NewtonConfig,
    bicgstab,
    ilu0_smoother,
    mg_vcycle,
    newton_solve,
)
from .transient import ProblemHierarchy, run_transient

__version__ = "0.1.0"
