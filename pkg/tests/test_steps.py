import math

import numpy as np
import pytest
import scipy.linalg

from alas.linalg import min_eigenpair, spectral_norm
from alas.steps import (
    StepKind,
    compute_direction,
    rayleigh_quotient,
    select_step_practical,
    select_step_theoretical,
)


def oracle_min_eigenvalue(H, tol=1e-12):
    """Independent smallest-eigenvalue oracle: bisection on t, counting
    eigenvalues below t through the inertia of the LDL' factorization."""
    H = np.asarray(H, dtype=float)
    bound = float(np.abs(H).sum(axis=1).max()) + 1.0  # Gershgorin
    lo, hi = -bound, bound

    def count_below(t):
        _, d, _ = scipy.linalg.ldl(H - t * np.eye(H.shape[0]))
        eigs = np.linalg.eigvalsh(d)  # d is (block) diagonal; signs suffice
        return int((eigs < 0).sum())

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if count_below(mid) >= 1:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def oracle_eigvec(H, lam):
    """Inverse iteration at a slightly shifted eigenvalue estimate."""
    n = H.shape[0]
    v = np.ones(n) / math.sqrt(n)
    shifted = H - (lam - 1e-7) * np.eye(n)
    for _ in range(50):
        v = scipy.linalg.solve(shifted, v)
        v /= np.linalg.norm(v)
    return v


class TestMinEigenpair:
    def test_diagonal(self):
        lam, v = min_eigenpair(np.diag([2.0, -3.0]))
        assert lam == pytest.approx(-3.0)
        assert v == pytest.approx([0.0, 1.0])

    def test_offdiagonal_2x2(self):
        lam, v = min_eigenpair(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert lam == pytest.approx(-1.0)
        assert v == pytest.approx(np.array([1.0, -1.0]) / math.sqrt(2.0))

    def test_random_6x6_against_bisection_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(10):
            A = rng.standard_normal((6, 6))
            H = (A + A.T) / 2
            lam, v = min_eigenpair(H)
            assert lam == pytest.approx(oracle_min_eigenvalue(H), abs=1e-8)
            ref = oracle_eigvec(H, lam)
            assert abs(abs(ref @ v) - 1.0) < 1e-8
            assert np.linalg.norm(H @ v - lam * v) <= 1e-10 * max(1.0, spectral_norm(H))

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValueError):
            min_eigenpair(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_unit_norm_and_sign_convention(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            A = rng.standard_normal((5, 5))
            lam, v = min_eigenpair((A + A.T) / 2)
            assert np.linalg.norm(v) == pytest.approx(1.0)
            nonzero = v[np.abs(v) > 1e-10]
            assert nonzero[0] > 0


class TestRayleighQuotient:
    def test_diag_mixture(self):
        assert rayleigh_quotient(np.diag([2.0, -1.0]), np.array([1.0, 1.0])) == pytest.approx(0.5)

    def test_identity(self):
        g = np.array([0.3, -2.0, 1.0])
        assert rayleigh_quotient(np.eye(3), g) == pytest.approx(1.0)

    def test_axis_aligned(self):
        assert rayleigh_quotient(np.diag([-2.0, 5.0]), np.array([1.0, 0.0])) == pytest.approx(-2.0)

    def test_zero_gradient_rejected(self):
        with pytest.raises(ValueError):
            rayleigh_quotient(np.eye(2), np.zeros(2))


class TestComputeDirection:
    def test_newton_diagonal(self):
        d = compute_direction(StepKind.NEWTON, np.diag([4.0, 2.0]), np.array([4.0, 2.0]))
        assert d == pytest.approx([-1.0, -1.0])

    def test_regularized_newton_diagonal(self):
        d = compute_direction(
            StepKind.REGULARIZED_NEWTON, np.diag([0.5, 1.0]), np.array([1.0, 0.0]),
            epsilon=0.01,
        )
        assert d == pytest.approx([-1.0 / 1.6, 0.0])

    def test_negative_curvature_keeps_sign_on_tie(self):
        d = compute_direction(
            StepKind.NEGATIVE_CURVATURE, np.diag([-2.0, 1.0]), np.array([0.0, 1.0]),
            lam=-2.0, eigvec=np.array([1.0, 0.0]),
        )
        assert d == pytest.approx([2.0, 0.0])

    def test_negative_curvature_flips_against_gradient(self):
        d = compute_direction(
            StepKind.NEGATIVE_CURVATURE, np.diag([-2.0, 1.0]), np.array([1.0, 0.0]),
            lam=-2.0, eigvec=np.array([1.0, 0.0]),
        )
        assert d == pytest.approx([-2.0, 0.0])
        assert d @ np.array([1.0, 0.0]) <= 0

    def test_gradient_negative_curvature(self):
        d = compute_direction(
            StepKind.GRADIENT_NEGATIVE_CURVATURE, None, np.array([1.0, 0.0]),
            rayleigh=-2.0,
        )
        assert d == pytest.approx([-2.0, 0.0])

    def test_zero(self):
        assert compute_direction(StepKind.ZERO, None, np.zeros(3)) == pytest.approx(np.zeros(3))


class TestTheoreticalPolicy:
    EPS = 0.01

    def test_newton_branch(self):
        d = select_step_theoretical(np.array([1.0, 0.0]), np.diag([4.0, 2.0]), self.EPS)
        assert d.kind is StepKind.NEWTON
        assert d.direction == pytest.approx([-0.25, 0.0])

    def test_negative_curvature_branch(self):
        d = select_step_theoretical(np.array([1.0, 0.0]), np.diag([-0.5, 1.0]), self.EPS)
        assert d.kind is StepKind.NEGATIVE_CURVATURE
        assert d.lambda_min == pytest.approx(-0.5)

    def test_zero_branch(self):
        d = select_step_theoretical(np.zeros(2), np.diag([1.0, 1.0]), self.EPS)
        assert d.kind is StepKind.ZERO
        assert np.array_equal(d.direction, np.zeros(2))

    def test_regularized_branch(self):
        d = select_step_theoretical(np.array([1.0, 0.0]), np.diag([0.5, 2.0]), self.EPS)
        assert d.kind is StepKind.REGULARIZED_NEWTON


class TestPracticalPolicy:
    EPS = 1e-5

    def test_gradient_negative_curvature(self):
        d = select_step_practical(np.array([1.0, 0.0]), np.diag([-2.0, 5.0]), self.EPS)
        assert d.kind is StepKind.GRADIENT_NEGATIVE_CURVATURE
        assert d.direction == pytest.approx([-2.0, 0.0])

    def test_scaled_gradient(self):
        d = select_step_practical(np.array([1.0, 0.0]), np.diag([0.5, 5.0]), self.EPS)
        assert d.kind is StepKind.SCALED_GRADIENT
        assert d.direction == pytest.approx([-1.0, 0.0])

    def test_newton_after_rayleigh_passthrough(self):
        d = select_step_practical(np.array([1.0, 0.0]), np.diag([5.0, 5.0]), self.EPS)
        assert d.kind is StepKind.NEWTON
        assert d.direction == pytest.approx([-0.2, 0.0])

    def test_zero_gradient_skips_rayleigh(self):
        d = select_step_practical(np.zeros(2), np.diag([1.0, 2.0]), self.EPS)
        assert d.kind is StepKind.ZERO
        assert d.rayleigh is None

    def test_zero_gradient_negative_curvature(self):
        d = select_step_practical(np.zeros(2), np.diag([-1.0, 2.0]), self.EPS)
        assert d.kind is StepKind.NEGATIVE_CURVATURE

    def test_tiny_gradient_below_epsilon_goes_to_eigen_path(self):
        # ||g|| < eps disables the scaled-gradient branch.
        g = np.array([1e-7, 0.0])
        d = select_step_practical(g, np.diag([0.5, 2.0]), self.EPS)
        assert d.kind in (StepKind.NEWTON, StepKind.REGULARIZED_NEWTON)


def random_instance(rng):
    n = int(rng.integers(1, 9))
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigs = rng.uniform(-3.0, 5.0, size=n)
    H = (q * eigs) @ q.T
    H = (H + H.T) / 2
    if rng.random() < 0.05:
        g = np.zeros(n)
    else:
        g = rng.standard_normal(n) * 10.0 ** rng.uniform(-6, 1)
    eps = float(rng.choice([1e-2, 1e-4, 1e-6]))
    return g, H, eps


def check_decision(decision, g, H, eps, practical):
    kind = decision.kind
    d = decision.direction
    gnorm = np.linalg.norm(g)
    if kind is StepKind.ZERO:
        assert gnorm == 0.0 and decision.lambda_min >= -math.sqrt(eps)
        assert not d.any()
        return
    if kind is StepKind.NEGATIVE_CURVATURE:
        lam = decision.lambda_min
        threshold = -math.sqrt(gnorm) if practical else -math.sqrt(eps)
        assert lam < threshold
        assert np.linalg.norm(d) == pytest.approx(-lam, rel=1e-10)
        assert np.linalg.norm(H @ d - lam * d) <= 1e-8 * np.linalg.norm(d)
        assert d @ g <= 0.0
    elif kind is StepKind.NEWTON:
        assert decision.lambda_min > math.sqrt(gnorm)
        assert np.linalg.norm(H @ d + g) <= 1e-10 * gnorm
        assert d @ g < 0.0
    elif kind is StepKind.REGULARIZED_NEWTON:
        lam = decision.lambda_min
        lower = -math.sqrt(gnorm) if practical else -math.sqrt(eps)
        assert lower <= lam <= math.sqrt(gnorm)
        shift = math.sqrt(gnorm) + math.sqrt(eps)
        res = np.linalg.norm((H + shift * np.eye(len(g))) @ d + g)
        assert res <= 1e-10 * gnorm
        assert d @ g < 0.0
    elif kind is StepKind.GRADIENT_NEGATIVE_CURVATURE:
        assert practical
        assert decision.rayleigh < -math.sqrt(gnorm)
        assert d == pytest.approx(decision.rayleigh / gnorm * g)
        assert d @ g < 0.0
    elif kind is StepKind.SCALED_GRADIENT:
        assert practical
        assert decision.rayleigh < math.sqrt(gnorm) and gnorm >= eps
        assert d == pytest.approx(-g / math.sqrt(gnorm))
        assert d @ g < 0.0


@pytest.mark.parametrize("practical", [False, True])
def test_randomized_decisions_satisfy_invariants(practical):
    rng = np.random.default_rng(99)
    select = select_step_practical if practical else select_step_theoretical
    for _ in range(500):
        g, H, eps = random_instance(rng)
        decision = select(g, H, eps)
        if not practical:
            assert decision.kind not in (
                StepKind.GRADIENT_NEGATIVE_CURVATURE, StepKind.SCALED_GRADIENT
            )
        check_decision(decision, g, H, eps, practical)


def test_direction_norm_bound_theoretical():
    # ||d|| <= max(||H||, ||g||^(1/2)) for the three eigen-path step kinds.
    rng = np.random.default_rng(7)
    for _ in range(500):
        g, H, eps = random_instance(rng)
        decision = select_step_theoretical(g, H, eps)
        bound = max(spectral_norm(H), math.sqrt(np.linalg.norm(g)))
        assert np.linalg.norm(decision.direction) <= bound * (1 + 1e-10)
