"""Search-direction computation and the two step-selection policies.

The theoretical policy picks among negative-curvature, Newton and regularized
Newton directions from the minimum eigenvalue of the sampled Hessian.  The
practical policy first tries two cheap gradient-based steps driven by the
Rayleigh quotient of the gradient, and only falls back to the eigenvalue path
when those do not apply.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .linalg import DEFAULT_EIG_TOL, min_eigenpair, solve_spd


class StepKind(enum.Enum):
    ZERO = "zero"
    NEGATIVE_CURVATURE = "negative_curvature"
    NEWTON = "newton"
    REGULARIZED_NEWTON = "regularized_newton"
    GRADIENT_NEGATIVE_CURVATURE = "gradient_negative_curvature"
    SCALED_GRADIENT = "scaled_gradient"


# Step kinds only the practical policy may produce.
PRACTICAL_ONLY_KINDS = frozenset(
    {StepKind.GRADIENT_NEGATIVE_CURVATURE, StepKind.SCALED_GRADIENT}
)


@dataclass(frozen=True)
class StepDecision:
    """Chosen step kind, its direction and the scalars that justified it.

    ``lambda_min``/``eigvec`` are present whenever the eigen path ran;
    ``rayleigh`` whenever the practical policy computed it.  Invariants per
    kind (with H, g the inputs that produced the decision):

    * negative curvature: ||d|| = -lambda_min, H d = lambda_min d, d'g <= 0
    * newton:             ||H d + g|| <= 1e-10 ||g||
    * regularized newton: ||(H + (||g||^(1/2) + eps^(1/2)) I) d + g|| <= 1e-10 ||g||
    * zero:               d = 0
    """

    kind: StepKind
    direction: np.ndarray
    grad_norm: float
    epsilon: float
    lambda_min: float | None = None
    eigvec: np.ndarray | None = None
    rayleigh: float | None = None

    def __post_init__(self):
        self.direction.setflags(write=False)


def rayleigh_quotient(H: np.ndarray, g: np.ndarray) -> float:
    """Curvature of H along g: g'Hg / ||g||^2.  Requires g != 0."""
    g = np.asarray(g, dtype=float)
    sq = float(g @ g)
    if sq == 0.0:
        raise ValueError("rayleigh_quotient requires a nonzero gradient")
    return float(g @ (H @ g)) / sq


def compute_direction(
    kind: StepKind,
    H: np.ndarray,
    g: np.ndarray,
    lam: float | None = None,
    eigvec: np.ndarray | None = None,
    epsilon: float = 0.0,
    rayleigh: float | None = None,
) -> np.ndarray:
    """Direction for one step kind.

    negative curvature:  eigvec scaled to norm -lam, flipped if v'g > 0
                         (v'g = 0 keeps the eigensolver's sign convention)
    newton:              solve H d = -g
    regularized newton:  solve (H + (||g||^(1/2) + eps^(1/2)) I) d = -g
    gradient neg. curv.: d = (R / ||g||) g            (requires R < 0)
    scaled gradient:     d = -g / ||g||^(1/2)
    """
    g = np.asarray(g, dtype=float)
    if kind is StepKind.ZERO:
        return np.zeros_like(g)
    if kind is StepKind.NEGATIVE_CURVATURE:
        if lam is None or eigvec is None or lam >= 0:
            raise ValueError("negative-curvature step needs an eigenpair with lambda < 0")
        d = (-lam) * np.asarray(eigvec, dtype=float)
        if float(d @ g) > 0.0:
            d = -d
        return d
    gnorm = float(np.linalg.norm(g))
    if kind is StepKind.NEWTON:
        return solve_spd(H, -g)
    if kind is StepKind.REGULARIZED_NEWTON:
        shift = math.sqrt(gnorm) + math.sqrt(epsilon)
        return solve_spd(H + shift * np.eye(g.size), -g)
    if kind is StepKind.GRADIENT_NEGATIVE_CURVATURE:
        if rayleigh is None or rayleigh >= 0:
            raise ValueError("gradient negative-curvature step needs a Rayleigh quotient < 0")
        return (rayleigh / gnorm) * g
    if kind is StepKind.SCALED_GRADIENT:
        if gnorm == 0.0:
            raise ValueError("scaled-gradient step needs a nonzero gradient")
        return -g / math.sqrt(gnorm)
    raise ValueError(f"unknown step kind {kind}")


def _eigen_path(
    g: np.ndarray,
    H: np.ndarray,
    epsilon: float,
    nc_threshold: float,
    rayleigh: float | None,
    eig_tol: float,
) -> StepDecision:
    """Shared eigenvalue branch: zero step, negative curvature, Newton, or
    regularized Newton.  ``nc_threshold`` is the negative-curvature cutoff
    (-eps^(1/2) for the theoretical policy, -||g||^(1/2) for the practical)."""
    gnorm = float(np.linalg.norm(g))
    lam, v = min_eigenpair(H, eig_tol)
    common = dict(
        grad_norm=gnorm, epsilon=epsilon, lambda_min=lam, eigvec=v, rayleigh=rayleigh
    )
    if lam >= -math.sqrt(epsilon) and gnorm == 0.0:
        return StepDecision(StepKind.ZERO, np.zeros_like(g), **common)
    if lam < nc_threshold:
        d = compute_direction(StepKind.NEGATIVE_CURVATURE, H, g, lam=lam, eigvec=v)
        return StepDecision(StepKind.NEGATIVE_CURVATURE, d, **common)
    if lam > math.sqrt(gnorm):
        d = compute_direction(StepKind.NEWTON, H, g)
        return StepDecision(StepKind.NEWTON, d, **common)
    d = compute_direction(StepKind.REGULARIZED_NEWTON, H, g, epsilon=epsilon)
    return StepDecision(StepKind.REGULARIZED_NEWTON, d, **common)


def select_step_theoretical(g: np.ndarray, H: np.ndarray, epsilon: float,
                            eig_tol: float = DEFAULT_EIG_TOL) -> StepDecision:
    """Step choice from the minimum eigenvalue lam of H:

    lam >= -eps^(1/2) and ||g|| = 0  ->  zero step
    lam <  -eps^(1/2)                ->  negative curvature
    lam >  ||g||^(1/2)               ->  Newton
    otherwise                        ->  regularized Newton
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    g = np.asarray(g, dtype=float)
    return _eigen_path(g, H, epsilon, -math.sqrt(epsilon), None, eig_tol)


def select_step_practical(g: np.ndarray, H: np.ndarray, epsilon: float,
                          eig_tol: float = DEFAULT_EIG_TOL) -> StepDecision:
    """Practical step choice: Rayleigh-quotient gradient steps first.

    With R = g'Hg/||g||^2 (undefined for g = 0, in which case both gradient
    branches are skipped):

    R < -||g||^(1/2)                  ->  d = (R/||g||) g
    R <  ||g||^(1/2) and ||g|| >= eps ->  d = -g/||g||^(1/2)
    otherwise the eigenvalue path runs with the negative-curvature cutoff
    tightened to -||g||^(1/2).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    g = np.asarray(g, dtype=float)
    gnorm = float(np.linalg.norm(g))
    rayleigh = None
    if gnorm > 0.0:
        rayleigh = rayleigh_quotient(H, g)
        root = math.sqrt(gnorm)
        if rayleigh < -root:
            d = compute_direction(
                StepKind.GRADIENT_NEGATIVE_CURVATURE, H, g, rayleigh=rayleigh
            )
            return StepDecision(
                StepKind.GRADIENT_NEGATIVE_CURVATURE, d,
                grad_norm=gnorm, epsilon=epsilon, rayleigh=rayleigh,
            )
        if rayleigh < root and gnorm >= epsilon:
            d = compute_direction(StepKind.SCALED_GRADIENT, H, g)
            return StepDecision(
                StepKind.SCALED_GRADIENT, d,
                grad_norm=gnorm, epsilon=epsilon, rayleigh=rayleigh,
            )
    return _eigen_path(g, H, epsilon, -math.sqrt(gnorm), rayleigh, eig_tol)
