"""Modulus providers: the three queries rule synthesis needs from a problem class.

All providers work in the noise-normalized model, so ``omega`` is the modulus
at a radius measured in standard deviations of the signal. ``score(eps)``
returns raw-outcome weights ``s`` whose statistic ``s @ Y`` is a positive
multiple of the likelihood-ratio direction at ``eps``; ``covariance`` is the
raw outcome covariance, so ``s @ covariance @ s`` is the statistic's
variance.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np

from .core import PreparedProblem
from .errors import RankDeficientDesign, ValidationError
from .modulus import ModulusPoint, closed_form_modulus, solve_modulus, w_star

# radius used to read off right limits at zero numerically
_LIMIT_EPS = 1e-6


class ModulusProvider(ABC):
    """Interface: ``omega``, ``omega_prime`` and ``score`` at a radius."""

    provider_id = "provider"

    @property
    @abstractmethod
    def covariance(self) -> np.ndarray:
        ...

    @abstractmethod
    def omega(self, eps: float) -> float:
        ...

    @abstractmethod
    def omega_prime(self, eps: float) -> float:
        """Derivative in ``eps``; the right derivative at 0."""

    @abstractmethod
    def score(self, eps: float) -> np.ndarray:
        ...

    def statistic_sd(self, weights) -> float:
        w = np.asarray(weights, float)
        return math.sqrt(float(w @ self.covariance @ w))


class RDLipschitzProvider(ModulusProvider):
    """Cutoff-change problem over Lipschitz functions.

    Parameters
    ----------
    problem : PreparedProblem
    constant_effect : bool
        Restrict the class to a treatment effect that does not vary with x.
    """

    def __init__(self, problem: PreparedProblem, constant_effect: bool = False):
        self.problem = problem
        self.constant_effect = constant_effect
        self.provider_id = "rd_lipschitz_constant_effect" if constant_effect else "rd_lipschitz"
        self._cache: dict[float, ModulusPoint] = {}

    @property
    def covariance(self):
        return np.diag(self.problem.sigma**2)

    def point(self, eps: float) -> ModulusPoint:
        eps = float(eps)
        pt = self._cache.get(eps)
        if pt is None:
            pt = None if self.constant_effect else closed_form_modulus(self.problem, eps)
            if pt is None:
                pt = solve_modulus(self.problem, eps, constant_effect=self.constant_effect)
            self._cache[eps] = pt
        return pt

    def omega(self, eps):
        return self.point(eps).omega

    def _numeric_limit(self):
        # the closed-form limits at zero need constant_effect off and C > 0
        return self.constant_effect or not self.problem.epsilon_bar > 0

    def omega_prime(self, eps):
        if eps == 0 and self._numeric_limit():
            return self.point(_LIMIT_EPS).omega_prime
        if eps == 0:
            return self.problem.sigma_bar / self.problem.n
        return self.point(eps).omega_prime

    def score(self, eps):
        p = self.problem
        if eps == 0:
            if self._numeric_limit():
                v = self.point(_LIMIT_EPS).observed(p.d)
                v = v / np.linalg.norm(v / p.sigma)
                return v / p.sigma**2
            return w_star(p).weights / p.sigma
        return self.point(eps).observed(p.d) / p.sigma**2


class StoyeProvider(ModulusProvider):
    """Scalar signal ``Y ~ N(theta_1, sigma^2)`` with welfare ``theta_2`` in a band.

    The parameter set is ``{|theta_1|, |theta_2| <= 1, |theta_2 - a theta_1| <= b}``.
    """

    def __init__(self, a: float, b: float, sigma: float = 1.0):
        if not 0 < a <= 1:
            raise ValidationError("a must lie in (0, 1]")
        if not 0 < b < 1:
            raise ValidationError("b must lie in (0, 1)")
        if not sigma > 0:
            raise ValidationError("sigma must be positive")
        self.a, self.b, self.sigma = float(a), float(b), float(sigma)
        self.provider_id = "stoye"

    @property
    def covariance(self):
        return np.array([[self.sigma**2]])

    def omega(self, eps):
        m = min(self.sigma * eps, 1.0)
        return min(self.a * m + self.b, 1.0)

    def omega_prime(self, eps):
        m = self.sigma * eps
        if m < 1.0 and self.a * m + self.b < 1.0:
            return self.a * self.sigma
        return 0.0

    def score(self, eps):
        return np.ones(1)


class AffineProvider(ModulusProvider):
    """Scalar problem with an uncapped affine modulus ``intercept + slope * eps``.

    Useful as an analytic test case for frontier quantities.
    """

    def __init__(self, intercept: float, slope: float):
        if intercept < 0 or slope <= 0:
            raise ValidationError("need intercept >= 0 and slope > 0")
        self.intercept, self.slope = float(intercept), float(slope)
        self.provider_id = "affine"

    @property
    def covariance(self):
        return np.ones((1, 1))

    def omega(self, eps):
        return self.intercept + self.slope * eps

    def omega_prime(self, eps):
        return self.slope

    def score(self, eps):
        return np.ones(1)


class LinearProvider(ModulusProvider):
    """Linear model ``Y = X beta + noise`` with target ``contrast @ beta``.

    The welfare difference is point identified, so the modulus is linear
    with slope ``kappa``. The score is the weighted-least-squares contrast
    weights at every radius; since it only fixes a direction, any positive
    multiple would define the same rule.
    """

    def __init__(self, design, covariance, contrast):
        X = np.atleast_2d(np.asarray(design, float))
        if X.shape[0] == 1 and np.ndim(design) == 1:
            X = X.T
        S = np.asarray(covariance, float)
        l = np.asarray(contrast, float).reshape(-1)
        n, k = X.shape
        if S.shape != (n, n) or l.size != k:
            raise ValidationError("design, covariance and contrast shapes disagree")
        if np.linalg.matrix_rank(X) < k:
            raise RankDeficientDesign("design does not have full column rank")
        S_inv_X = np.linalg.solve(S, X)
        info = X.T @ S_inv_X
        info_inv_l = np.linalg.solve(info, l)
        self._cov = S
        self.kappa = math.sqrt(float(l @ info_inv_l))
        self.wls_weights = S_inv_X @ info_inv_l
        self.provider_id = "linear"

    @property
    def covariance(self):
        return self._cov

    def omega(self, eps):
        return self.kappa * eps

    def omega_prime(self, eps):
        return self.kappa

    def score(self, eps):
        return self.wls_weights.copy()


def make_provider(kind: str, *args, **kwargs) -> ModulusProvider:
    """Build a provider by name.

    ``kind`` is one of ``"rd_lipschitz"`` (problem, constant_effect=False),
    ``"stoye"`` (a, b, sigma=1), ``"linear"`` (design, covariance, contrast)
    or ``"affine"`` (intercept, slope).
    """
    table = {
        "rd_lipschitz": RDLipschitzProvider,
        "stoye": StoyeProvider,
        "linear": LinearProvider,
        "affine": AffineProvider,
    }
    try:
        cls = table[kind]
    except KeyError:
        raise ValidationError(f"unknown provider kind {kind!r}") from None
    return cls(*args, **kwargs)
