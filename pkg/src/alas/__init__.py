"""Subsampled second-order line-search optimization toolkit."""

from .driver import (
    AcceptanceRule,
    IterationRecord,
    Policy,
    RunConfig,
    RunTrace,
    SamplingScheme,
    TerminationReason,
    function_stationarity_check,
    model_stationarity_check,
    run,
    sgd_run,
)
from .linalg import min_eigenpair, spectral_norm
from .linesearch import DecreaseCondition, LineSearchConfig, LineSearchResult, backtrack, decrease_condition
from .problems import (
    AccuracyReport,
    FiniteSumProblem,
    NumericFailure,
    QuadraticSumProblem,
    SampleSet,
    SubsampledModel,
    check_accuracy,
    evaluate_model,
    full_sample,
)
from .steps import (
    StepDecision,
    StepKind,
    compute_direction,
    rayleigh_quotient,
    select_step_practical,
    select_step_theoretical,
)
from .theory import (
    ProblemConstants,
    SampleBoundKind,
    SamplingRegime,
    complexity_report,
    compute_theory_report,
    inflate_tolerances,
    lemma3_constants,
    pi_epsilon,
    rho,
    sample_bound,
    stopping_probability,
    u_l,
)

__version__ = "0.1.0"
