"""Outer optimization loops: the subsampled line-search method in both its
theoretical and practical variants, and a constant-step SGD baseline run
under the same sampling and metric conventions.

Per iteration the driver draws a sample, builds the sampled model, selects a
step, line-searches on the model, evaluates the "next gradient" at the trial
point with the same sample, and tests model stationarity
(min{||g||, ||g+||} <= eps and lambda_min >= -eps^(1/2)).  A run stops after
J+1 consecutive model-stationary iterations, on budget exhaustion, or - for
fully sampled runs only - when the line search exhausts its backtracks (with
a fixed model, resampling cannot change the outcome).
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, replace

import numpy as np

from .linalg import min_eigenpair
from .linesearch import LineSearchConfig, backtrack
from .problems import (
    FiniteSumProblem,
    NumericFailure,
    SampleSet,
    evaluate_model,
    full_gradient,
    full_hessian,
    full_value,
    model_gradient,
    model_value,
)
from .sampling import epoch_partition_sampler, sample_digest, with_replacement_sampler
from .steps import StepKind, select_step_practical, select_step_theoretical

# Iterates beyond this norm are treated as divergence by the SGD baseline.
DIVERGENCE_NORM_BOUND = 1e30


class Policy(enum.Enum):
    THEORETICAL = "theoretical"
    PRACTICAL = "practical"


class AcceptanceRule(enum.Enum):
    # PLAIN always moves to x + alpha d; STEP7_PRIME keeps the iterate fixed
    # on model-stationary iterations so that stationarity is re-measured at
    # the same point under fresh samples.
    PLAIN = "plain"
    STEP7_PRIME = "step7prime"


class SamplingScheme(enum.Enum):
    WITH_REPLACEMENT = "replacement"
    EPOCH_PARTITION = "partition"


class TerminationReason(enum.Enum):
    J_CONSECUTIVE_STATIONARY = "j_consecutive_stationary"
    MAX_ITERATIONS = "max_iterations"
    WALL_CLOCK = "wall_clock"
    LINE_SEARCH_EXHAUSTION = "line_search_exhaustion"


@dataclass(frozen=True)
class RunConfig:
    policy: Policy
    epsilon: float
    line_search: LineSearchConfig
    sampling: SamplingScheme
    fraction: float
    acceptance: AcceptanceRule = AcceptanceRule.PLAIN
    j_consecutive: int | None = None
    max_iterations: int = 1000
    wall_clock_seconds: float | None = None
    seed: int = 0
    full_metrics_every: int = 0

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError("sample fraction must lie in (0, 1]")
        if self.j_consecutive is not None and self.j_consecutive < 0:
            raise ValueError("j_consecutive must be nonnegative")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.full_metrics_every < 0:
            raise ValueError("full_metrics_every must be nonnegative (0 disables)")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    elapsed_s: float
    step_kind: StepKind
    alpha: float
    ls_iters: int
    sampled_loss: float
    full_loss: float | None
    grad_norm: float
    next_grad_norm: float | None
    lambda_min: float | None
    rayleigh: float | None
    sample_fraction: float
    sample_digest: str
    model_loss_after: float | None
    model_stationary: bool


@dataclass
class RunTrace:
    config: RunConfig
    records: tuple[IterationRecord, ...]
    termination: TerminationReason | None
    final_x: np.ndarray
    final_full_loss: float | None = None
    meta: dict | None = None

    def __post_init__(self):
        self.records = tuple(self.records)
        self.final_x = np.asarray(self.final_x, dtype=float)
        if self.meta is None:
            self.meta = {}

    def __eq__(self, other):
        if not isinstance(other, RunTrace):
            return NotImplemented
        return (
            self.config == other.config
            and self.records == other.records
            and self.termination == other.termination
            and np.array_equal(self.final_x, other.final_x)
            and self.final_full_loss == other.final_full_loss
            and self.meta == other.meta
        )


def model_stationarity_check(grad_norm: float, next_grad_norm: float,
                             lambda_min: float, eps_g: float, eps_H: float) -> bool:
    """min{||g_k||, ||g_k+||} <= eps_g and lambda_k >= -eps_H."""
    return min(grad_norm, next_grad_norm) <= eps_g and lambda_min >= -eps_H


def function_stationarity_check(problem: FiniteSumProblem, x, x_next,
                                eps_g: float, eps_H: float) -> bool:
    """The same test on the true objective: min of the full gradient norms at
    the two points against eps_g, and the full Hessian's smallest eigenvalue
    at the first point against -eps_H (conjunction, mirroring the model
    test)."""
    gn = float(np.linalg.norm(full_gradient(problem, x)))
    gn_next = float(np.linalg.norm(full_gradient(problem, x_next)))
    if min(gn, gn_next) > eps_g:
        return False
    lam, _ = min_eigenpair(full_hessian(problem, x))
    return lam >= -eps_H


@dataclass(frozen=True)
class RunState:
    x: np.ndarray
    k: int = 0
    stationary_streak: int = 0


def make_sampler(config: RunConfig, N: int):
    seed = [config.seed, 1]
    if config.sampling is SamplingScheme.WITH_REPLACEMENT:
        return with_replacement_sampler(N, config.fraction, seed)
    if config.sampling is SamplingScheme.EPOCH_PARTITION:
        return epoch_partition_sampler(N, config.fraction, seed)
    raise ValueError(f"unknown sampling scheme {config.sampling}")


def _select(policy: Policy, g, H, epsilon):
    if policy is Policy.THEORETICAL:
        return select_step_theoretical(g, H, epsilon)
    return select_step_practical(g, H, epsilon)


def alas_step(state: RunState, problem: FiniteSumProblem, sampler,
              config: RunConfig) -> tuple[RunState, IterationRecord, np.ndarray, bool]:
    """One full iteration.  Returns (new state, record, tentative point,
    line-search exhausted flag); the tentative point is x + alpha d before
    the acceptance rule runs."""
    x = state.x
    sample: SampleSet = next(sampler)
    model = evaluate_model(problem, x, sample)
    decision = _select(config.policy, model.gradient, model.hessian, config.epsilon)

    exhausted = False
    if decision.kind is StepKind.ZERO:
        alpha, ls_iters = 0.0, 0
        x_tentative = x
        m_after_tentative = model.value
        g_plus = model.gradient
    else:
        result = backtrack(
            lambda y: model_value(problem, y, sample), x, decision.direction,
            config.line_search,
        )
        ls_iters = result.j
        if result.satisfied:
            alpha = result.alpha
            x_tentative = x + alpha * decision.direction
            m_after_tentative = result.m0 + result.accepted_decrease
            g_plus = model_gradient(problem, x_tentative, sample)
        else:
            # Exhausted backtracks: fall back to a zero step; a fresh sample
            # defines a new model next iteration.
            exhausted = True
            alpha = 0.0
            x_tentative = x
            m_after_tentative = model.value
            g_plus = model.gradient

    grad_norm = decision.grad_norm
    next_grad_norm = float(np.linalg.norm(g_plus))
    eps = config.epsilon
    lam = decision.lambda_min
    if min(grad_norm, next_grad_norm) <= eps:
        if lam is None:
            # Practical gradient branches skip the eigensolve; stationarity
            # still needs the curvature test.
            lam, _ = min_eigenpair(model.hessian)
        stationary = model_stationarity_check(
            grad_norm, next_grad_norm, lam, eps, math.sqrt(eps)
        )
    else:
        stationary = False

    if config.acceptance is AcceptanceRule.STEP7_PRIME and stationary:
        x_next = x
        m_after = model.value
    else:
        x_next = x_tentative
        m_after = m_after_tentative

    record = IterationRecord(
        k=state.k,
        elapsed_s=0.0,
        step_kind=decision.kind,
        alpha=float(alpha),
        ls_iters=ls_iters,
        sampled_loss=model.value,
        full_loss=None,
        grad_norm=grad_norm,
        next_grad_norm=next_grad_norm,
        lambda_min=None if lam is None else float(lam),
        rayleigh=decision.rayleigh,
        sample_fraction=sample.fraction,
        sample_digest=sample_digest(sample, config.seed),
        model_loss_after=m_after,
        model_stationary=stationary,
    )
    new_state = RunState(
        x=x_next,
        k=state.k + 1,
        stationary_streak=state.stationary_streak + 1 if stationary else 0,
    )
    return new_state, record, x_tentative, exhausted


def run(problem: FiniteSumProblem, config: RunConfig, x0,
        observer=None, meta=None) -> RunTrace:
    """Iterate alas_step until J+1 consecutive model-stationary iterations or
    budget exhaustion.  ``observer``, when given, is called per iteration
    with (record, x_k, x_tentative, x_{k+1}).  Numeric failures propagate
    with the partial trace attached."""
    state = RunState(x=np.asarray(x0, dtype=float))
    sampler = make_sampler(config, problem.N)
    records: list[IterationRecord] = []
    started = time.monotonic()
    termination = TerminationReason.MAX_ITERATIONS
    cadence = config.full_metrics_every
    try:
        for k in range(config.max_iterations):
            x_before = state.x
            state, record, x_tentative, exhausted = alas_step(
                state, problem, sampler, config
            )

            elapsed = time.monotonic() - started
            if config.wall_clock_seconds is not None:
                record = replace(record, elapsed_s=elapsed)

            stop = None
            if (
                config.j_consecutive is not None
                and state.stationary_streak >= config.j_consecutive + 1
            ):
                stop = TerminationReason.J_CONSECUTIVE_STATIONARY
            elif exhausted and config.fraction >= 1.0:
                stop = TerminationReason.LINE_SEARCH_EXHAUSTION
            elif (
                config.wall_clock_seconds is not None
                and elapsed >= config.wall_clock_seconds
            ):
                stop = TerminationReason.WALL_CLOCK
            last = stop is not None or k == config.max_iterations - 1

            if cadence > 0 and (k % cadence == 0 or last):
                record = replace(record, full_loss=full_value(problem, x_before))

            records.append(record)
            if observer is not None:
                observer(record, x_before, x_tentative, state.x)
            if stop is not None:
                termination = stop
                break
    except NumericFailure as failure:
        failure.trace = RunTrace(config, tuple(records), None, state.x, meta=meta)
        raise
    final_full = full_value(problem, state.x) if cadence > 0 else None
    return RunTrace(config, tuple(records), termination, state.x,
                    final_full_loss=final_full, meta=meta)


def sgd_run(problem: FiniteSumProblem, learning_rate: float, config: RunConfig,
            x0, observer=None, meta=None) -> RunTrace:
    """Constant-step SGD baseline: x <- x - lr * g(x; S_k) under the same
    sampling schemes and metric cadence.  Records carry the scaled-gradient
    step kind with alpha = lr; curvature quantities are never computed, so
    runs stop on budgets only.  Non-finite or unbounded iterates raise a
    numeric failure with the partial trace attached."""
    if learning_rate <= 0:
        raise ValueError("learning_rate must be positive")
    x = np.asarray(x0, dtype=float)
    sampler = make_sampler(config, problem.N)
    records: list[IterationRecord] = []
    started = time.monotonic()
    termination = TerminationReason.MAX_ITERATIONS
    cadence = config.full_metrics_every
    try:
        for k in range(config.max_iterations):
            sample = next(sampler)
            sampled_loss = model_value(problem, x, sample)
            grad = model_gradient(problem, x, sample)
            x_next = x - learning_rate * grad

            norm_next = float(np.linalg.norm(x_next))
            if not math.isfinite(norm_next) or norm_next > DIVERGENCE_NORM_BOUND:
                raise NumericFailure(
                    f"SGD iterate diverged at iteration {k} (norm {norm_next:.3e})"
                )

            elapsed = time.monotonic() - started
            stop = None
            if (
                config.wall_clock_seconds is not None
                and elapsed >= config.wall_clock_seconds
            ):
                stop = TerminationReason.WALL_CLOCK
            last = stop is not None or k == config.max_iterations - 1

            record = IterationRecord(
                k=k,
                elapsed_s=elapsed if config.wall_clock_seconds is not None else 0.0,
                step_kind=StepKind.SCALED_GRADIENT,
                alpha=float(learning_rate),
                ls_iters=0,
                sampled_loss=sampled_loss,
                full_loss=full_value(problem, x)
                if cadence > 0 and (k % cadence == 0 or last)
                else None,
                grad_norm=float(np.linalg.norm(grad)),
                next_grad_norm=None,
                lambda_min=None,
                rayleigh=None,
                sample_fraction=sample.fraction,
                sample_digest=sample_digest(sample, config.seed),
                model_loss_after=None,
                model_stationary=False,
            )
            records.append(record)
            if observer is not None:
                observer(record, x, x_next, x_next)
            x = x_next
            if stop is not None:
                termination = stop
                break
    except NumericFailure as failure:
        failure.trace = RunTrace(config, tuple(records), None, x, meta=meta)
        raise
    final_full = full_value(problem, x) if cadence > 0 else None
    return RunTrace(config, tuple(records), termination, x,
                    final_full_loss=final_full, meta=meta)
