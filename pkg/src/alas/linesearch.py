"""Backtracking line search on the sampled model.

The step length is theta^j for the smallest j such that the model decreases
by a forcing term that is cubic (theoretical algorithm) or quadratic
(practical algorithm) in the step norm.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .problems import NumericFailure


class DecreaseCondition(enum.Enum):
    CUBIC = "cubic"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class LineSearchConfig:
    theta: float = 0.9
    eta: float = 1e-2
    condition: DecreaseCondition = DecreaseCondition.CUBIC
    j_max: int = 50

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError("theta must lie in (0, 1)")
        if self.eta <= 0.0:
            raise ValueError("eta must be positive")
        if self.j_max < 1:
            raise ValueError("j_max must be at least 1")


@dataclass(frozen=True)
class LineSearchResult:
    """Outcome of one backtracking run.

    ``alpha`` = theta^j for the accepted j; when no j in {0..j_max} satisfies
    the decrease condition, ``satisfied`` is False and alpha = theta^j_max
    (the driver treats that as a zero step).  ``trials`` records every
    (alpha, model decrease) pair in trial order; ``m0`` is the model value at
    the start point.
    """

    alpha: float
    j: int
    satisfied: bool
    m0: float
    trials: tuple[tuple[float, float], ...] = field(repr=False)

    @property
    def accepted_decrease(self) -> float:
        return self.trials[-1][1]


def decrease_condition(
    condition: DecreaseCondition,
    m_trial: float,
    m0: float,
    alpha: float,
    d_norm: float,
    eta: float,
) -> bool:
    """Sufficient-decrease test for a trial step length.

    cubic:     m_trial - m0 <= -(eta/6) alpha^3 ||d||^3
    quadratic: m_trial - m0 <= -(eta/2) alpha^2 ||d||^2
    """
    if condition is DecreaseCondition.CUBIC:
        return m_trial - m0 <= -(eta / 6.0) * alpha**3 * d_norm**3
    if condition is DecreaseCondition.QUADRATIC:
        return m_trial - m0 <= -(eta / 2.0) * alpha**2 * d_norm**2
    raise ValueError(f"unknown decrease condition {condition}")


def backtrack(model, x: np.ndarray, d: np.ndarray, cfg: LineSearchConfig) -> LineSearchResult:
    """Find the smallest j in {0..j_max} whose step theta^j satisfies the
    decrease condition for ``model`` (a callable x -> m(x; S)) along d.

    Each trial costs one model evaluation beyond m0.  A non-finite model
    value raises NumericFailure.
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(d, dtype=float)
    d_norm = float(np.linalg.norm(d))
    if d_norm == 0.0:
        raise ValueError("backtrack requires a nonzero direction")
    m0 = float(model(x))
    if not math.isfinite(m0):
        raise NumericFailure("model value at the line-search origin is not finite")
    trials: list[tuple[float, float]] = []
    for j in range(cfg.j_max + 1):
        alpha = cfg.theta**j
        m_trial = float(model(x + alpha * d))
        if not math.isfinite(m_trial):
            raise NumericFailure(f"model value at trial step {alpha!r} is not finite")
        trials.append((alpha, m_trial - m0))
        if decrease_condition(cfg.condition, m_trial, m0, alpha, d_norm, cfg.eta):
            return LineSearchResult(alpha, j, True, m0, tuple(trials))
    return LineSearchResult(cfg.theta**cfg.j_max, cfg.j_max, False, m0, tuple(trials))
