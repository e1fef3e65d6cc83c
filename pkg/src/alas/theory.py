"""Closed-form constants and worst-case bounds for the subsampled line search.

Everything here is exact arithmetic on user-supplied problem constants: the
line-search step constants, the sample-fraction threshold function rho, the
uniform-sampling size bounds, the combined per-iteration fraction pi(eps),
and the expected iteration / evaluation bounds.  Nothing is estimated from
data.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class ProblemConstants:
    """Global problem bounds used by the calculators.

    L: Lipschitz constant of the component gradients (L = U_H is valid).
    L_H: Lipschitz constant of the component Hessians.
    U_g / U_H: bounds on component gradient / Hessian norms along the run.
    f_up: bound on component values along the run.
    f_low: lower bound on the objective.  f0: initial objective value.
    """

    L: float
    L_H: float
    U_g: float
    U_H: float
    f_up: float = 1.0
    f_low: float = 0.0
    f0: float = 1.0


@dataclass(frozen=True)
class LineSearchConstants:
    """Per-step-kind lower bounds c_* on alpha*||d|| / eps^(1/2) and upper
    bounds jbar_* on the backtrack count, plus their min/max aggregates."""

    c_nc: float
    c_n: float
    c_rn: float
    c: float
    jbar_nc: float
    jbar_n: float
    jbar_rn: float
    jbar: float


def _log_theta_clamped(theta: float, arg: float) -> float:
    # [log_theta(arg)]_+ with [t]_+ = max(t, 0); arg > 1 gives a negative
    # log (base < 1) and clamps to zero.
    return max(math.log(arg) / math.log(theta), 0.0)


def lemma3_constants(theta: float, eta: float, L_H: float, U_g: float,
                     epsilon: float) -> LineSearchConstants:
    """Step-size constants of the backtracking analysis.

    c_nc = 3 theta / (L_H + eta)
    c_n  = min( sqrt(2/L_H), 3 theta / (L_H + eta) )
    c_rn = min( 1 / (1 + sqrt(1 + L_H/2)), 6 theta / (L_H + eta) )
    jbar_nc = [log_theta( 3/(L_H+eta) )]_+
    jbar_n  = [log_theta( sqrt(3/(L_H+eta)) * eps^(1/2)/sqrt(U_g) )]_+
    jbar_rn = [log_theta( 6/(L_H+eta) * eps/U_g )]_+
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if min(eta, L_H, U_g, epsilon) <= 0.0:
        raise ValueError("eta, L_H, U_g and epsilon must be positive")
    c_nc = 3.0 * theta / (L_H + eta)
    c_n = min(math.sqrt(2.0 / L_H), c_nc)
    c_rn = min(1.0 / (1.0 + math.sqrt(1.0 + L_H / 2.0)), 6.0 * theta / (L_H + eta))
    jbar_nc = _log_theta_clamped(theta, 3.0 / (L_H + eta))
    jbar_n = _log_theta_clamped(
        theta, math.sqrt(3.0 / (L_H + eta)) * math.sqrt(epsilon) / math.sqrt(U_g)
    )
    jbar_rn = _log_theta_clamped(theta, 6.0 / (L_H + eta) * epsilon / U_g)
    return LineSearchConstants(
        c_nc=c_nc,
        c_n=c_n,
        c_rn=c_rn,
        c=min(c_nc, c_n, c_rn),
        jbar_nc=jbar_nc,
        jbar_n=jbar_n,
        jbar_rn=jbar_rn,
        jbar=max(jbar_nc, jbar_n, jbar_rn),
    )


def u_l(U_g: float, U_H: float, L: float) -> float:
    """Per-iteration increase bound U_L = U_g max{U_H, U_g^(1/2)}
    + (L/2) max{U_H^2, U_g}."""
    return U_g * max(U_H, math.sqrt(U_g)) + (L / 2.0) * max(U_H**2, U_g)


def rho(t: float, q: float, U_L: float, eta: float) -> float:
    """Sample-fraction threshold (1-q) U_L / ((1-q) U_L + q eta t^3 / 24).

    Values lie in [0, 1]; the function is nonincreasing in t and q.  The
    indeterminate corner t = 0, q = 1 is defined as 0 by convention.
    """
    if t < 0.0 or not 0.0 <= q <= 1.0:
        raise ValueError("rho needs t >= 0 and q in [0, 1]")
    num = (1.0 - q) * U_L
    den = num + q * eta * t**3 / 24.0
    if den == 0.0:
        return 0.0
    return num / den


class SampleBoundKind(enum.Enum):
    HESSIAN = "hessian"
    FUNCTION = "function"
    GRADIENT = "gradient"


def sample_bound(kind: SampleBoundKind, N: int, constants: ProblemConstants,
                 delta: float, p: float) -> float:
    """Uniform-with-replacement sample fraction sufficient for one accuracy
    event to hold with probability at least p:

    hessian:  (16 L^2 / delta_H) ln(2N/(1-p)) / N
    function: (16 f_up^2 / delta_f) ln(2/(1-p)) / N
    gradient: (U_g^2 / delta_g^2) (1 + sqrt(8 ln(1/(1-p))))^2 / N

    Values above 1 are returned untruncated (the caller clamps to full
    sampling).  p = 1 is rejected; the full-sample regime is handled
    separately by the complexity bounds.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1); full sampling covers p = 1")
    if N < 1:
        raise ValueError("N must be at least 1")
    if kind is SampleBoundKind.HESSIAN:
        return 16.0 * constants.L**2 / delta * math.log(2.0 * N / (1.0 - p)) / N
    if kind is SampleBoundKind.FUNCTION:
        return 16.0 * constants.f_up**2 / delta * math.log(2.0 / (1.0 - p)) / N
    if kind is SampleBoundKind.GRADIENT:
        factor = (1.0 + math.sqrt(8.0 * math.log(1.0 / (1.0 - p)))) ** 2
        return constants.U_g**2 / delta**2 * factor / N
    raise ValueError(f"unknown sample bound kind {kind}")


def pi_epsilon(epsilon: float, p: float, N: int, constants: ProblemConstants,
               kappa_g: float, kappa_H: float, theta: float, eta: float) -> float:
    """Combined per-iteration sample fraction sufficient for p-probabilistic
    accuracy at tolerances delta_f = (eta/24) c^3 eps^(3/2),
    delta_g = kappa_g eps, delta_H = kappa_H eps^(1/2).

    With p_hat = (p+3)/4, the fraction is the maximum of

      rho(c eps^(1/2), p_hat)
      (344 f_up^2 / (eta c^3 eps^(3/2))) ln(2/(1-p_hat)) / N
      (U_g^2 / (kappa_g^2 eps^2)) (1 + sqrt(8 ln(1/(1-p_hat))))^2 / N
      (16 L^2 / (kappa_H eps^(1/2))) ln(2N/(1-p_hat)) / N

    (the 344 constant is kept as stated by the source analysis).
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    if not (0.0 < kappa_g < 1.0 and 0.0 < kappa_H < 1.0):
        raise ValueError("kappa_g and kappa_H must lie in (0, 1)")
    p_hat = (p + 3.0) / 4.0
    c = lemma3_constants(theta, eta, constants.L_H, constants.U_g, epsilon).c
    U_L = u_l(constants.U_g, constants.U_H, constants.L)
    t_rho = rho(c * math.sqrt(epsilon), p_hat, U_L, eta)
    t_fun = (
        344.0 * constants.f_up**2 / (eta * c**3 * epsilon**1.5)
        * math.log(2.0 / (1.0 - p_hat)) / N
    )
    t_grad = sample_bound(SampleBoundKind.GRADIENT, N, constants, kappa_g * epsilon, p_hat)
    t_hess = sample_bound(
        SampleBoundKind.HESSIAN, N, constants, kappa_H * math.sqrt(epsilon), p_hat
    )
    return max(t_rho, t_fun, t_grad, t_hess)


class SamplingRegime(enum.Enum):
    FULL = "full"
    SUBSAMPLED = "subsampled"


@dataclass(frozen=True)
class ComplexityBounds:
    """Expected-iteration and expected-evaluation bounds.

    expected_first_stationary bounds the first function-stationary iteration
    index; expected_j_consecutive bounds the first run of J+1 consecutive
    model-stationary iterations (under the reject-when-stationary step rule);
    derivative/function evaluation bounds follow the same split, with the
    function count inflated by the worst-case line-search length 1 + jbar.
    """

    c_hat: float
    epsilon_hat: float
    expected_first_stationary: float
    expected_j_consecutive: float
    derivative_evaluations: float
    function_evaluations: float


def epsilon_hat(epsilon: float, kappa_g: float, kappa_H: float) -> float:
    """Shrunk tolerance min{(1-kg)/(1+kg), (1-kH)^2/(1+kH)^2} * eps."""
    return min(
        (1.0 - kappa_g) / (1.0 + kappa_g),
        (1.0 - kappa_H) ** 2 / (1.0 + kappa_H) ** 2,
    ) * epsilon


def complexity_report(f0: float, f_low: float, eta: float, c: float,
                      epsilon: float, p: float, regime: SamplingRegime,
                      J: int, kappa_g: float, kappa_H: float, jbar: float,
                      U_L: float) -> ComplexityBounds:
    """Worst-case expected iteration/evaluation bounds, with
    c_hat = (eta/24) c^3 and Delta = f0 - f_low:

    full sampling:
      E[first stationary]  <= Delta/c_hat * eps^(-3/2) + 1
      E[J+1 consecutive]   <= Delta/c_hat * eps^(-3/2) + J + 1
      derivative evals     <= Delta/c_hat * eps^(-3/2) + 1
    subsampled (rho evaluated at the stated tolerance):
      E[first stationary]  <= Delta/c_hat * rho(c eps^(1/2), p)^(-1) eps^(-3/2) + 1
      E[J+1 consecutive]   <= p^(-(J+1)) [Delta/c_hat * rho(c ehat^(1/2), p)^(-1)
                              ehat^(-3/2) + J + 1]
      derivative evals     <= the J-consecutive bound
    function evals multiply the derivative bound by (1 + jbar).
    """
    if f0 < f_low:
        raise ValueError("f0 must be at least f_low")
    if J < 0:
        raise ValueError("J must be nonnegative")
    c_hat = eta / 24.0 * c**3
    delta0 = f0 - f_low
    base = delta0 / c_hat * epsilon**-1.5
    e_hat = epsilon_hat(epsilon, kappa_g, kappa_H)
    if regime is SamplingRegime.FULL:
        first = base + 1.0
        consecutive = base + J + 1.0
        deriv = base + 1.0
    else:
        if not 0.0 < p < 1.0:
            raise ValueError("subsampled bounds need p in (0, 1)")
        if e_hat <= 0.0:
            raise ValueError("kappa_g and kappa_H must lie in (0, 1) when subsampling")
        rho_eps = rho(c * math.sqrt(epsilon), p, U_L, eta)
        rho_hat = rho(c * math.sqrt(e_hat), p, U_L, eta)
        first = base / rho_eps + 1.0
        consecutive = p ** -(J + 1) * (
            delta0 / c_hat / rho_hat * e_hat**-1.5 + J + 1.0
        )
        deriv = consecutive
    return ComplexityBounds(
        c_hat=c_hat,
        epsilon_hat=e_hat,
        expected_first_stationary=first,
        expected_j_consecutive=consecutive,
        derivative_evaluations=deriv,
        function_evaluations=(1.0 + jbar) * deriv,
    )


def inflate_tolerances(epsilon: float, kappa_g: float, kappa_H: float) -> tuple[float, float]:
    """Stationarity tolerances certified for the true objective when the
    model meets delta_g <= kappa_g * eps, delta_H <= kappa_H * eps^(1/2):
    ((1 + kappa_g) eps, (1 + kappa_H) eps^(1/2))."""
    if kappa_g < 0.0 or kappa_H < 0.0:
        raise ValueError("kappa_g and kappa_H must be nonnegative")
    return (1.0 + kappa_g) * epsilon, (1.0 + kappa_H) * math.sqrt(epsilon)


def stopping_probability(p: float, J: int) -> float:
    """Probability 1 - (1-p)^(J+1) that a run of J+1 consecutive
    model-stationary iterations contains a function-stationary iterate."""
    if not 0.0 < p <= 1.0:
        raise ValueError("p must lie in (0, 1]")
    if J < 0:
        raise ValueError("J must be nonnegative")
    return 1.0 - (1.0 - p) ** (J + 1)


@dataclass(frozen=True)
class TheoryReport:
    """Every calculator output for one set of inputs, ready for rendering."""

    inputs: dict = field(repr=False)
    constants: LineSearchConstants
    U_L: float
    delta_f: float
    delta_g: float
    delta_H: float
    rho_at_tolerance: float
    pi_hessian: float
    pi_function: float
    pi_gradient: float
    pi_eps: float
    bounds_full: ComplexityBounds
    bounds_subsampled: ComplexityBounds
    inflated_tolerances: tuple[float, float]
    stop_probability: float


def compute_theory_report(constants: ProblemConstants, theta: float, eta: float,
                          epsilon: float, p: float, kappa_g: float,
                          kappa_H: float, J: int, N: int) -> TheoryReport:
    """Assemble the full report: constants, accuracy tolerances, sample
    bounds, the combined fraction, and the complexity bounds in both
    sampling regimes."""
    ls = lemma3_constants(theta, eta, constants.L_H, constants.U_g, epsilon)
    U_L = u_l(constants.U_g, constants.U_H, constants.L)
    delta_f = eta / 24.0 * ls.c**3 * epsilon**1.5
    delta_g = kappa_g * epsilon
    delta_H = kappa_H * math.sqrt(epsilon)
    report = TheoryReport(
        inputs=dict(
            L=constants.L, L_H=constants.L_H, U_g=constants.U_g, U_H=constants.U_H,
            f_up=constants.f_up, f_low=constants.f_low, f0=constants.f0,
            theta=theta, eta=eta, epsilon=epsilon, p=p,
            kappa_g=kappa_g, kappa_H=kappa_H, J=J, N=N,
        ),
        constants=ls,
        U_L=U_L,
        delta_f=delta_f,
        delta_g=delta_g,
        delta_H=delta_H,
        rho_at_tolerance=rho(ls.c * math.sqrt(epsilon), p, U_L, eta),
        pi_hessian=sample_bound(SampleBoundKind.HESSIAN, N, constants, delta_H, p),
        pi_function=sample_bound(SampleBoundKind.FUNCTION, N, constants, delta_f, p),
        pi_gradient=sample_bound(SampleBoundKind.GRADIENT, N, constants, delta_g, p),
        pi_eps=pi_epsilon(epsilon, p, N, constants, kappa_g, kappa_H, theta, eta),
        bounds_full=complexity_report(
            constants.f0, constants.f_low, eta, ls.c, epsilon, p,
            SamplingRegime.FULL, J, kappa_g, kappa_H, ls.jbar, U_L,
        ),
        bounds_subsampled=complexity_report(
            constants.f0, constants.f_low, eta, ls.c, epsilon, p,
            SamplingRegime.SUBSAMPLED, J, kappa_g, kappa_H, ls.jbar, U_L,
        ),
        inflated_tolerances=inflate_tolerances(epsilon, kappa_g, kappa_H),
        stop_probability=stopping_probability(p, J),
    )
    return report
