"""Linear estimators of the welfare difference and the bias-sd frontier."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import optimize

from .core import PreparedProblem, a_star
from .errors import (
    BracketFailure,
    DegreeTooHigh,
    InvalidEpsilon,
    NotApplicable,
    RankDeficientDesign,
    ValidationError,
)
from .providers import ModulusProvider, RDLipschitzProvider


@dataclass(frozen=True, eq=False)
class LinearEstimator:
    """Estimator ``raw_weights @ Y`` with its worst-case bias and sd."""

    raw_weights: np.ndarray
    epsilon: float
    max_bias: float
    sd: float
    label: str = ""

    @property
    def meta(self) -> dict:
        return {"epsilon": self.epsilon, "max_bias": self.max_bias, "sd": self.sd}

    def estimate(self, outcomes) -> float:
        y = np.asarray(outcomes, float)
        if y.shape != self.raw_weights.shape:
            raise ValidationError("outcomes length differs from weights")
        return float(self.raw_weights @ y)


class BiasVariance(NamedTuple):
    max_bias: float
    sd: float


def _mse_gap(provider, eps):
    return eps * eps / (eps * eps + 1.0) - provider.omega_prime(eps) * eps / provider.omega(eps)


def epsilon_mse(provider: ModulusProvider, *, eps_hi: float = 1e3) -> float:
    """Radius of the minimax-MSE point on the frontier.

    Solves ``eps**2 / (eps**2 + 1) = eps * omega'(eps) / omega(eps)``.
    The left side minus the right is negative near zero; the bracket is
    doubled from 1 until the sign changes or ``eps_hi`` is passed.
    """
    lo = 1e-8
    if provider.omega(lo) <= 0:
        raise BracketFailure("modulus vanishes near zero")
    if _mse_gap(provider, lo) >= 0:
        raise BracketFailure("gap already nonnegative at the lower end")
    hi = 1.0
    while (g := _mse_gap(provider, hi)) < 0:
        lo = hi
        hi *= 2.0
        if hi > eps_hi:
            raise BracketFailure(f"no sign change up to eps = {eps_hi}")
    if g == 0:
        return hi
    return optimize.brentq(lambda e: _mse_gap(provider, e), lo, hi, xtol=1e-14, rtol=1e-15, maxiter=500)


def bias_variance(provider: ModulusProvider, epsilon: float) -> BiasVariance:
    """Worst-case bias and sd of the frontier estimator at ``epsilon`` (normalized units)."""
    if not epsilon > 0:
        raise InvalidEpsilon("epsilon must be positive")
    w = provider.omega(epsilon)
    wp = provider.omega_prime(epsilon)
    return BiasVariance(max(w - epsilon * wp, 0.0), wp)


def frontier_estimator(provider: ModulusProvider, epsilon: float, label: str = "frontier") -> LinearEstimator:
    """Estimator ``(omega'(eps) / eps) * score(eps) @ Y``."""
    bv = bias_variance(provider, epsilon)
    weights = (bv.sd / epsilon) * provider.score(epsilon)
    return LinearEstimator(np.asarray(weights, float), float(epsilon), bv.max_bias, bv.sd, label)


def minimax_mse_estimator(provider: ModulusProvider, constant_effect: bool = False) -> LinearEstimator:
    """Linear estimator minimizing worst-case mean squared error.

    With ``constant_effect`` an RD provider is replaced by one over the
    class with a treatment effect constant in x; bias and sd are then
    reported for that restricted class. When the welfare difference is
    point identified the result is the unbiased limit of the frontier and
    ``epsilon`` is ``inf``.
    """
    if constant_effect:
        if not isinstance(provider, RDLipschitzProvider):
            raise ValidationError("constant_effect needs an rd_lipschitz provider")
        if not provider.constant_effect:
            provider = RDLipschitzProvider(provider.problem, constant_effect=True)
    label = "mse_constant_effect" if constant_effect else "mse"
    try:
        eps = epsilon_mse(provider)
    except BracketFailure:
        if provider.omega(0.0) > 1e-12 * provider.omega_prime(0.0):
            raise
        # point identified: the frontier collapses to the unbiased estimator
        # and the weights do not depend on the radius
        est = frontier_estimator(provider, 1.0, label)
        return LinearEstimator(est.raw_weights, math.inf, 0.0, est.sd, label)
    return frontier_estimator(provider, eps, label)


def bias_weight_alpha(provider: ModulusProvider, epsilon_star: float | None = None) -> float:
    """Weight on squared bias that makes the minimax regret radius frontier-optimal.

    Returns ``alpha`` such that ``eps*`` is a stationary point of
    ``alpha * max_bias(eps)**2 + (1 - alpha) * sd(eps)**2``. Along the
    frontier ``d max_bias = -eps * d sd``, which gives
    ``alpha = sd / (sd + eps * max_bias)``.
    """
    if epsilon_star is None:
        from .rules import find_epsilon_star

        epsilon_star = find_epsilon_star(provider)
    if epsilon_star <= 0 or abs(epsilon_star - a_star()) < 1e-9:
        raise NotApplicable("radius is at a boundary of its search interval")
    bv = bias_variance(provider, epsilon_star)
    return bv.sd / (bv.sd + epsilon_star * bv.max_bias)


def _poly_design(problem: PreparedProblem, degree: int):
    x, d = problem.x, problem.d
    scale = float(np.max(np.abs(x))) or 1.0
    # scaled powers keep the basis well conditioned; fitted values do not depend on it
    P = np.vander(x / scale, degree + 1, increasing=True)
    return np.hstack([P, d[:, None] * P]), P


def polynomial_wls_estimator(problem: PreparedProblem, degree: int) -> LinearEstimator:
    """Plug-in estimator from a global polynomial fit with a treatment shift.

    Fits ``f(x, d) = sum_k alpha_k x**k + d * sum_k beta_k x**k`` by
    weighted least squares with weights ``1 / sigma**2`` and averages the
    implied treatment effect over the affected units.
    """
    from .regret import max_bias

    if degree < 0 or int(degree) != degree:
        raise ValidationError("degree must be a nonnegative integer")
    degree = int(degree)
    k = 2 * (degree + 1)
    if k > problem.n:
        raise DegreeTooHigh(f"degree {degree} needs at least {k} units")
    X, P = _poly_design(problem, degree)
    if np.linalg.matrix_rank(X) < k:
        raise RankDeficientDesign("polynomial design is rank deficient")
    prec = 1.0 / problem.sigma**2
    contrast = np.concatenate([np.zeros(degree + 1), problem.welfare_weights @ P])
    info = X.T @ (prec[:, None] * X)
    w = prec * (X @ np.linalg.solve(info, contrast))
    sd = math.sqrt(float(np.sum(w**2 * problem.sigma**2)))
    return LinearEstimator(w, math.nan, max_bias(problem, w), sd, f"polynomial_{degree}")
