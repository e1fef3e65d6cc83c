"""Dense symmetric eigen/solve kernels shared by the step engine.

Desk-scale matrices only: everything goes through exact LAPACK
factorizations, no iterative solvers.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .problems import NumericFailure

SYMMETRY_TOL = 1e-12
DEFAULT_EIG_TOL = 1e-10


def require_symmetric(H: np.ndarray, tol: float = SYMMETRY_TOL) -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    gap = float(np.abs(H - H.T).max()) if H.size else 0.0
    if gap > tol * max(1.0, float(np.abs(H).max())):
        raise ValueError(f"matrix is not symmetric (max |H - H'| = {gap:.3e})")
    return H


def min_eigenpair(H: np.ndarray, tol: float = DEFAULT_EIG_TOL) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and a unit eigenvector of a symmetric matrix.

    The eigenvector sign is normalized so that its first component of
    magnitude above ``tol`` is positive (deterministic output).  Accuracy is
    LAPACK-grade: |lambda - lambda_min| and the residual ||Hv - lambda v||
    are both well below tol * max(1, ||H||).
    """
    H = require_symmetric(H)
    try:
        w, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise NumericFailure(f"symmetric eigendecomposition failed: {exc}") from None
    lam = float(w[0])
    v = V[:, 0].copy()
    for entry in v:
        if abs(entry) > tol:
            if entry < 0:
                v = -v
            break
    return lam, v


def spectral_norm(A: np.ndarray) -> float:
    """Spectral norm of a symmetric matrix via its extreme eigenvalues."""
    A = require_symmetric(A)
    w = np.linalg.eigvalsh(A)
    return float(max(abs(w[0]), abs(w[-1])))


def solve_spd(H: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve H d = rhs for symmetric positive definite H via Cholesky.

    One step of iterative refinement keeps the residual near machine level
    even for moderately ill-conditioned systems.
    """
    try:
        factor = scipy.linalg.cho_factor(H, lower=True, check_finite=False)
        d = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
        r = rhs - H @ d
        d = d + scipy.linalg.cho_solve(factor, r, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NumericFailure(f"Cholesky factorization failed: {exc}") from None
    if not np.isfinite(d).all():
        raise NumericFailure("linear solve produced non-finite entries")
    return d
