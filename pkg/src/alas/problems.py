"""Finite-sum problems and their subsampled models.

A finite-sum problem is f(x) = (1/N) * sum_i f_i(x) with twice-differentiable
components.  A subsampled model replaces the mean over all N components by the
mean over a sample of indices (with multiplicity when the sample was drawn
with replacement).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class NumericFailure(RuntimeError):
    """A numerical evaluation produced a non-finite result (or a factorization
    broke down).  Drivers attach the partial run trace when available."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class FiniteSumProblem:
    """Oracle for N component functions f_i on R^n.

    Subclasses must set ``n`` and ``N`` and implement ``component``; the
    batched hooks have loop-based defaults and exist so that concrete problems
    (e.g. the MLP objectives) can vectorize over samples.  The oracle must be
    deterministic: identical (i, x) always yields identical outputs, and each
    component Hessian must be symmetric (1e-12 entrywise).
    """

    n: int
    N: int

    def component(self, i: int, x: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
        """Return (f_i(x), grad f_i(x), hess f_i(x)) for index i in {0..N-1}."""
        raise NotImplementedError

    def component_value(self, i: int, x: np.ndarray) -> float:
        return self.component(i, x)[0]

    # Batched hooks.  Outputs are stacked in the order of ``indices``.

    def batch_components(self, indices, x):
        vals = np.empty(len(indices))
        grads = np.empty((len(indices), self.n))
        hessians = np.empty((len(indices), self.n, self.n))
        for pos, i in enumerate(indices):
            vals[pos], grads[pos], hessians[pos] = self.component(int(i), x)
        return vals, grads, hessians

    def batch_values(self, indices, x):
        return np.array([self.component_value(int(i), x) for i in indices])

    def batch_gradients(self, indices, x):
        return np.stack([self.component(int(i), x)[1] for i in indices])


@dataclass(frozen=True)
class SampleSet:
    """Ordered sample of component indices (0-based), possibly with repeats.

    ``indices`` keeps draw order; averages over the set are reduced in
    ascending position.  The fraction |S|/N must lie in (0, 1].
    """

    indices: np.ndarray
    N: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        idx.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        if idx.size == 0:
            raise ValueError("sample set must be non-empty")
        if idx.min() < 0 or idx.max() >= self.N:
            raise ValueError(f"sample indices must lie in [0, {self.N})")
        if idx.size > self.N:
            raise ValueError("sample fraction must not exceed 1")

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def fraction(self) -> float:
        return self.indices.size / self.N

    def __eq__(self, other):
        if not isinstance(other, SampleSet):
            return NotImplemented
        return self.N == other.N and np.array_equal(self.indices, other.indices)


def full_sample(problem: FiniteSumProblem) -> SampleSet:
    """The sample covering every component exactly once, in ascending order."""
    return SampleSet(np.arange(problem.N), problem.N)


@dataclass(frozen=True)
class SubsampledModel:
    """Value, gradient and Hessian of the sampled mean at one point."""

    value: float
    gradient: np.ndarray
    hessian: np.ndarray
    sample: SampleSet

    def __post_init__(self):
        self.gradient.setflags(write=False)
        self.hessian.setflags(write=False)


def _check_finite_batch(indices, vals, grads, hessians):
    for name, arr in (("value", vals), ("gradient", grads), ("hessian", hessians)):
        if arr is None:
            continue
        flat = arr.reshape(len(indices), -1)
        bad = ~np.isfinite(flat).all(axis=1)
        if bad.any():
            i = int(np.asarray(indices)[int(np.argmax(bad))])
            raise NumericFailure(f"non-finite {name} from component {i}")


def _mean(stacked: np.ndarray):
    # Reduction over axis 0 in stacked (ascending) position order; numpy's
    # pairwise reduction is deterministic and within 1e-12 of a running sum.
    return np.add.reduce(stacked, axis=0) / stacked.shape[0]


def evaluate_model(problem: FiniteSumProblem, x: np.ndarray, sample: SampleSet) -> SubsampledModel:
    """Build the subsampled model (mean value/gradient/Hessian) at x.

    Repeated indices count with multiplicity.  Raises NumericFailure naming
    the offending component when an oracle output is non-finite.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n,):
        raise ValueError(f"x must have shape ({problem.n},), got {x.shape}")
    if not np.isfinite(x).all():
        raise ValueError("x must be finite")
    vals, grads, hessians = problem.batch_components(sample.indices, x)
    _check_finite_batch(sample.indices, vals, grads, hessians)
    return SubsampledModel(
        value=float(_mean(vals)),
        gradient=_mean(grads),
        hessian=_mean(hessians),
        sample=sample,
    )


def model_value(problem: FiniteSumProblem, x: np.ndarray, sample: SampleSet) -> float:
    """m(x; S) alone (used by the line search, which needs no derivatives)."""
    vals = problem.batch_values(sample.indices, x)
    _check_finite_batch(sample.indices, vals, None, None)
    return float(_mean(vals))


def model_gradient(problem: FiniteSumProblem, x: np.ndarray, sample: SampleSet) -> np.ndarray:
    grads = problem.batch_gradients(sample.indices, x)
    _check_finite_batch(sample.indices, None, grads, None)
    return _mean(grads)


def full_value(problem: FiniteSumProblem, x: np.ndarray) -> float:
    """f(x), computed through the same reduction path as the sampled mean."""
    return model_value(problem, x, full_sample(problem))


def full_gradient(problem: FiniteSumProblem, x: np.ndarray) -> np.ndarray:
    return model_gradient(problem, x, full_sample(problem))


def full_hessian(problem: FiniteSumProblem, x: np.ndarray) -> np.ndarray:
    return evaluate_model(problem, x, full_sample(problem)).hessian


@dataclass(frozen=True)
class AccuracyReport:
    """Observed model/function discrepancies against the (delta_f, delta_g,
    delta_H) thresholds: values and gradients at both iteration endpoints,
    Hessian (spectral norm) at the first."""

    value_gap_at_x: float
    value_gap_at_next: float
    gradient_gap_at_x: float
    gradient_gap_at_next: float
    hessian_gap: float
    deltas: tuple[float, float, float]
    accurate: bool


def check_accuracy(
    problem: FiniteSumProblem,
    x: np.ndarray,
    x_next: np.ndarray,
    model: SubsampledModel,
    next_gradient: np.ndarray,
    deltas: tuple[float, float, float],
) -> AccuracyReport:
    """Check the five accuracy inequalities of a sampled model.

    ``model`` must have been evaluated at ``x``; ``next_gradient`` is the
    sampled gradient at ``x_next`` under the same sample.  Full-function
    quantities are evaluated exactly (affordable at desk scale only).
    """
    from .linalg import spectral_norm

    x = np.asarray(x, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    next_gradient = np.asarray(next_gradient, dtype=float)
    if x.shape != (problem.n,) or x_next.shape != (problem.n,):
        raise ValueError("point dimension does not match the problem")
    if next_gradient.shape != (problem.n,):
        raise ValueError("next_gradient dimension does not match the problem")

    delta_f, delta_g, delta_h = deltas
    f_x = full_value(problem, x)
    f_next = full_value(problem, x_next)
    m_next = model_value(problem, x_next, model.sample)
    g_x = full_gradient(problem, x)
    g_next = full_gradient(problem, x_next)
    h_x = full_hessian(problem, x)

    report = AccuracyReport(
        value_gap_at_x=abs(f_x - model.value),
        value_gap_at_next=abs(f_next - m_next),
        gradient_gap_at_x=float(np.linalg.norm(g_x - model.gradient)),
        gradient_gap_at_next=float(np.linalg.norm(g_next - next_gradient)),
        hessian_gap=spectral_norm(h_x - model.hessian),
        deltas=(delta_f, delta_g, delta_h),
        accurate=False,
    )
    accurate = (
        report.value_gap_at_x <= delta_f
        and report.value_gap_at_next <= delta_f
        and report.gradient_gap_at_x <= delta_g
        and report.gradient_gap_at_next <= delta_g
        and report.hessian_gap <= delta_h
    )
    object.__setattr__(report, "accurate", accurate)
    return report


class ComponentFunctionProblem(FiniteSumProblem):
    """Finite-sum problem backed by a callable i, x -> (value, grad, hess)."""

    def __init__(self, n, N, oracle):
        self.n = n
        self.N = N
        self._oracle = oracle

    def component(self, i, x):
        v, g, h = self._oracle(i, x)
        return float(v), np.asarray(g, dtype=float), np.asarray(h, dtype=float)


class QuadraticSumProblem(FiniteSumProblem):
    """Components f_i(x) = 0.5 x'A_i x + b_i'x + c_i with symmetric A_i."""

    def __init__(self, terms):
        terms = [
            (np.asarray(A, dtype=float), np.asarray(b, dtype=float), float(c))
            for A, b, c in terms
        ]
        n = terms[0][1].size
        for A, b, _ in terms:
            if A.shape != (n, n) or b.shape != (n,):
                raise ValueError("inconsistent term dimensions")
            if np.abs(A - A.T).max() > 1e-12:
                raise ValueError("quadratic terms must be symmetric")
        self.n = n
        self.N = len(terms)
        self._terms = terms

    def component(self, i, x):
        A, b, c = self._terms[i]
        return float(0.5 * x @ A @ x + b @ x + c), A @ x + b, A.copy()

    def component_value(self, i, x):
        A, b, c = self._terms[i]
        return float(0.5 * x @ A @ x + b @ x + c)


def diagonal_quadratic(diag) -> QuadraticSumProblem:
    """Single-component f(x) = 0.5 x' diag(d) x."""
    d = np.asarray(diag, dtype=float)
    return QuadraticSumProblem([(np.diag(d), np.zeros(d.size), 0.0)])


def decomposed_quadratic(diag, n_components: int = 8, spread: float = 1.0) -> QuadraticSumProblem:
    """Finite-sum split of f(x) = 0.5 x' diag(d) x into n_components terms:
    every component carries the same quadratic plus a linear offset, and the
    offsets come in +/- pairs so their sum is exactly zero.  Subsampled
    models then genuinely differ from the full objective."""
    if n_components % 2:
        raise ValueError("n_components must be even")
    d = np.asarray(diag, dtype=float)
    A = np.diag(d)
    rng = np.random.default_rng(1234)  # fixed split, deterministic problem
    terms = []
    for _ in range(n_components // 2):
        b = spread * rng.standard_normal(d.size)
        terms.append((A, b, 0.0))
        terms.append((A, -b, 0.0))
    return QuadraticSumProblem(terms)


def two_component_1d() -> QuadraticSumProblem:
    """f_1(x) = x^2, f_2(x) = (x - 2)^2 on R."""
    return QuadraticSumProblem(
        [
            (np.array([[2.0]]), np.array([0.0]), 0.0),
            (np.array([[2.0]]), np.array([-4.0]), 4.0),
        ]
    )
