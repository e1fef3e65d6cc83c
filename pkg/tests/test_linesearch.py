import math

import numpy as np
import pytest

from alas.linesearch import (
    DecreaseCondition,
    LineSearchConfig,
    backtrack,
    decrease_condition,
)
from alas.problems import NumericFailure
from alas.steps import StepKind, select_step_theoretical
from alas.theory import lemma3_constants


class TestDecreaseCondition:
    def test_cubic_strong_decrease(self):
        assert decrease_condition(DecreaseCondition.CUBIC, -1.0, 0.0, 1.0, 1.0, 0.01)

    def test_cubic_no_decrease(self):
        assert not decrease_condition(DecreaseCondition.CUBIC, 0.0, 0.0, 1.0, 1.0, 0.01)

    def test_quadratic_hand_value(self):
        # -0.09 <= -(0.01/2) * 0.9^2 = -0.00405
        assert decrease_condition(DecreaseCondition.QUADRATIC, -0.09, 0.0, 0.9, 1.0, 0.01)

    def test_cubic_threshold_exact(self):
        rhs = -(0.01 / 6.0) * 0.5**3 * 2.0**3
        assert decrease_condition(DecreaseCondition.CUBIC, rhs, 0.0, 0.5, 2.0, 0.01)
        assert not decrease_condition(
            DecreaseCondition.CUBIC, rhs + 1e-15, 0.0, 0.5, 2.0, 0.01
        )


def profile_model(phi):
    """1-D model m(x) = phi(x[0]) for line searches from x=0 along d=(1,)."""
    return lambda x: phi(float(x[0]))


CFG = LineSearchConfig(theta=0.9, eta=0.01, condition=DecreaseCondition.CUBIC, j_max=50)


class TestBacktrack:
    def test_linear_decrease_accepts_unit_step(self):
        result = backtrack(profile_model(lambda t: -t), np.zeros(1), np.ones(1), CFG)
        assert result.satisfied and result.j == 0 and result.alpha == 1.0

    def test_quadratic_bump_needs_one_backtrack(self):
        # phi(a) = -a + a^2: a=1 gives 0, rejected; a=0.9 gives -0.09.
        result = backtrack(
            profile_model(lambda t: -t + t * t), np.zeros(1), np.ones(1), CFG
        )
        assert result.satisfied and result.j == 1
        assert result.alpha == pytest.approx(0.9)
        assert result.trials[0][1] == pytest.approx(0.0)
        assert result.trials[1][1] == pytest.approx(-0.09)

    def test_ascent_direction_exhausts(self):
        result = backtrack(profile_model(lambda t: t), np.zeros(1), np.ones(1), CFG)
        assert not result.satisfied
        assert len(result.trials) == 51
        assert result.alpha == pytest.approx(0.9**50)

    def test_zero_direction_rejected(self):
        with pytest.raises(ValueError):
            backtrack(profile_model(lambda t: -t), np.zeros(1), np.zeros(1), CFG)

    def test_non_finite_model_raises(self):
        with pytest.raises(NumericFailure):
            backtrack(
                profile_model(lambda t: float("nan") if t > 0 else 0.0),
                np.zeros(1), np.ones(1), CFG,
            )

    def test_trial_count_is_j_plus_one(self):
        calls = []

        def phi(t):
            calls.append(t)
            return -t + 2.0 * t * t

        result = backtrack(profile_model(phi), np.zeros(1), np.ones(1), CFG)
        assert result.satisfied
        # One evaluation for m0 plus j+1 trials.
        assert len(calls) == 1 + result.j + 1


def test_config_validation():
    with pytest.raises(ValueError):
        LineSearchConfig(theta=1.0)
    with pytest.raises(ValueError):
        LineSearchConfig(eta=0.0)
    with pytest.raises(ValueError):
        LineSearchConfig(j_max=0)


def test_minimality_on_random_profiles():
    # Whenever the search accepts with j >= 1, the condition must fail at
    # theta^(j-1).
    rng = np.random.default_rng(123)
    for _ in range(300):
        coeffs = rng.standard_normal(4) * 10.0 ** rng.uniform(-2, 1)
        phi = np.polynomial.Polynomial(np.concatenate([[0.0], coeffs]))
        d = float(rng.uniform(0.1, 3.0))
        cfg = LineSearchConfig(
            theta=float(rng.uniform(0.5, 0.95)), eta=float(rng.uniform(1e-3, 1.0)),
            condition=DecreaseCondition.CUBIC, j_max=30,
        )
        model = profile_model(lambda t, phi=phi, d=d: float(phi(t)))
        result = backtrack(model, np.zeros(1), np.array([d]), cfg)
        if result.satisfied and result.j >= 1:
            prev = cfg.theta ** (result.j - 1)
            assert not decrease_condition(
                cfg.condition, float(phi(prev * d)), float(phi(0.0)), prev, d, cfg.eta
            )


class CubicFamilyInstance:
    """1-D model g*t + h/2 t^2 + s/6 t^3 with |s| <= 6 (Hessian-Lipschitz 6)."""

    L_H = 6.0

    def __init__(self, g, h, s):
        self.g, self.h, self.s = g, h, s

    def value(self, t):
        return self.g * t + 0.5 * self.h * t * t + self.s / 6.0 * t**3

    def slope(self, t):
        return self.g + self.h * t + 0.5 * self.s * t * t


def test_step_size_lower_bound_on_cubic_family():
    # Designed family with known Hessian-Lipschitz constant: accepted steps
    # under the non-stationarity event satisfy alpha*||d|| >= c * eps^(1/2)
    # and terminate within jbar + 1 backtracks.
    rng = np.random.default_rng(2024)
    theta, eta, eps = 0.9, 1e-2, 1e-4
    checked = 0
    for _ in range(500):
        inst = CubicFamilyInstance(
            g=float(rng.standard_normal() * 10.0 ** rng.uniform(-2, 1)),
            h=float(rng.uniform(-4.0, 4.0)),
            s=float(rng.uniform(-6.0, 6.0)),
        )
        decision = select_step_theoretical(
            np.array([inst.g]), np.array([[inst.h]]), eps
        )
        if decision.kind is StepKind.ZERO:
            continue
        cfg = LineSearchConfig(theta=theta, eta=eta, condition=DecreaseCondition.CUBIC)
        model = profile_model(inst.value)
        result = backtrack(model, np.zeros(1), decision.direction, cfg)
        if not result.satisfied:
            continue
        d = float(decision.direction[0])
        g_plus = abs(inst.slope(result.alpha * d))
        event = min(abs(inst.g), g_plus) > eps or inst.h < -math.sqrt(eps)
        if not event:
            continue
        checked += 1
        constants = lemma3_constants(theta, eta, inst.L_H, U_g=1.0, epsilon=eps)
        assert result.alpha * abs(d) >= constants.c * math.sqrt(eps) * (1 - 1e-12)
        # Backtrack-count bound with the instance's own gradient bounds.
        D = abs(d)
        L_eff = max(inst.L_H, abs(inst.h) + abs(inst.s) * D)
        U_g_inst = abs(inst.g) + abs(inst.h) * D + 0.5 * abs(inst.s) * D * D
        jbar = lemma3_constants(theta, eta, L_eff, max(U_g_inst, eps), eps).jbar
        assert result.j <= math.floor(jbar) + 1
    assert checked > 100
