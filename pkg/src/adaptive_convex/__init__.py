"""Adaptive sampling and shape-constrained estimation of convex functions on [0, 1]."""

from .convex_fn import (
    ConvexFn,
    DataDerived,
    Interval,
    NegSqrt,
    PiecewiseLinear,
    Quadratic,
    SoftPlus,
    affine,
    check_convex_grid,
    delta,
    hinge,
    load_knots,
    parse_function,
    save_knots,
    secant,
    test_functions,
)
from .errors import (
    BudgetExhausted,
    ConvergenceError,
    ConvexError,
    DomainError,
    IntegrationError,
    MissingPointError,
    OracleError,
    ShapeError,
    StateError,
    ToleranceError,
)
from .harness import (
    ExperimentConfig,
    RunRecord,
    dyadic_seq,
    fit_slope,
    load_config,
    parse_config,
    run_active,
    run_active_dyadic,
    run_experiment,
    run_oracle,
    run_passive_dyadic,
)
from .modulus import (
    ComplexityReport,
    complexity_report,
    lambda_avg,
    lambda_max,
    n_lower,
    omega,
    t_left,
    t_right,
)
from .noiseless import run_noiseless
from .noisy import ConfidenceFn, NoisyOracle, NoisyState, phi, run_noisy, step
from .packing import Decision, Packing, build_packing, oracle_allocation, oracle_test, samples_per_point
from .regression import PiecewiseLinearFit, WeightedSample, convex_lsq, linf_project
from .tree import IntervalTree, SecantModel

__version__ = "0.1.0"
