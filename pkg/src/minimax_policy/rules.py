"""Minimax regret decision rules built from a modulus provider."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .core import PHI0, PreparedProblem, a_star, mills_ratio, norm_cdf
from .errors import (
    DimensionMismatch,
    FlatModulus,
    NonUnimodal,
    NotApplicable,
    RandomizedRule,
    ValidationError,
)
from .providers import LinearProvider, ModulusProvider, RDLipschitzProvider

NONRANDOMIZED = "nonrandomized"
RANDOMIZED = "randomized"


@dataclass(frozen=True, eq=False)
class DecisionRule:
    """Linear rule on raw outcomes with optional Gaussian noise.

    The rule picks policy 1 with probability ``Phi(raw_weights @ y / noise_sd)``
    when ``noise_sd > 0`` and with probability ``1{raw_weights @ y >= 0}``
    otherwise. ``noise_sd`` is in the units of the raw statistic.
    """

    raw_weights: np.ndarray
    noise_sd: float
    kind: str
    sigma_star: float = math.nan
    epsilon_star: float = math.nan
    minimax_risk: float = math.nan
    provider_id: str = ""

    @property
    def meta(self) -> dict:
        return {
            "sigma_star": self.sigma_star,
            "epsilon_star": self.epsilon_star,
            "minimax_risk": self.minimax_risk,
            "provider_id": self.provider_id,
        }

    def to_dict(self) -> dict:
        out = asdict(self)
        out["raw_weights"] = [float(v) for v in self.raw_weights]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "DecisionRule":
        fields = {k: data[k] for k in ("raw_weights", "noise_sd", "kind") if k in data}
        if len(fields) < 3:
            raise ValidationError("rule needs raw_weights, noise_sd and kind")
        extra = {k: (math.nan if data.get(k) is None else data[k])
                 for k in ("sigma_star", "epsilon_star", "minimax_risk") if k in data}
        return cls(np.asarray(fields["raw_weights"], float), float(fields["noise_sd"]), fields["kind"],
                   provider_id=data.get("provider_id", ""), **extra)


class DecisionOutcome(NamedTuple):
    prob_policy1: float
    action: int | None


def sigma_star(provider: ModulusProvider) -> float:
    """Noise level below which the minimax rule randomizes (normalized units)."""
    slope = provider.omega_prime(0.0)
    if not slope > 0:
        raise FlatModulus("modulus has zero slope at the origin")
    return 2.0 * PHI0 * provider.omega(0.0) / slope


def _gap(provider, eps):
    wp = provider.omega_prime(eps)
    if wp <= 0:
        return -math.inf
    return float(mills_ratio(eps)) - provider.omega(eps) / wp


def find_epsilon_star(provider: ModulusProvider, *, xtol: float = 1e-10, max_iter: int = 200) -> float:
    """Radius of the least favorable one-dimensional subproblem.

    Bisection on ``mills(eps) = omega(eps) / omega'(eps)`` over ``[0, a*]``.
    The left side decreases in ``eps`` for a concave modulus; a violation
    raises :class:`NonUnimodal`.
    """
    s_star = sigma_star(provider)
    if s_star >= 1.0:
        return 0.0
    a = a_star()
    h_hi = _gap(provider, a)
    # a linear modulus puts the root exactly at a*; allow rounding there
    if h_hi >= -1e-12:
        return a
    lo, hi = 0.0, a
    h_lo = _gap(provider, 0.0)
    if not h_lo > 0:
        raise NonUnimodal("first-order condition is not positive at zero")
    for _ in range(max_iter):
        if hi - lo <= xtol:
            break
        mid = 0.5 * (lo + hi)
        h = _gap(provider, mid)
        if h > h_lo + 1e-8 or h < h_hi - 1e-8:
            raise NonUnimodal(f"first-order condition not monotone near {mid}")
        if h > 0:
            lo, h_lo = mid, h
        else:
            hi, h_hi = mid, h
    return 0.5 * (lo + hi)


def build_rule(provider: ModulusProvider) -> DecisionRule:
    """Minimax regret rule for the provider's problem."""
    s_star = sigma_star(provider)
    eps = find_epsilon_star(provider)
    if s_star < 1.0:
        w = provider.score(eps)
        noise, kind = 0.0, NONRANDOMIZED
    else:
        w = provider.score(0.0)
        if s_star == 1.0:
            noise, kind = 0.0, NONRANDOMIZED
        else:
            noise = provider.statistic_sd(w) * math.sqrt(s_star**2 - 1.0)
            kind = RANDOMIZED
    risk = provider.omega(eps) * float(norm_cdf(-eps))
    return DecisionRule(np.asarray(w, float), noise, kind, s_star, eps, risk, provider.provider_id)


def decide(rule: DecisionRule, outcomes, seed: int | None = None) -> DecisionOutcome:
    """Probability of choosing policy 1 and, given a seed, a sampled action.

    Ties in the nonrandomized statistic go to policy 1. Without a seed the
    action is reported only when it is deterministic.
    """
    y = np.asarray(outcomes, float).reshape(-1)
    if y.size != rule.raw_weights.size:
        raise DimensionMismatch(f"got {y.size} outcomes for {rule.raw_weights.size} weights")
    stat = float(rule.raw_weights @ y)
    if rule.noise_sd > 0:
        prob = float(norm_cdf(stat / rule.noise_sd))
    else:
        prob = 1.0 if stat >= 0 else 0.0
    if seed is None:
        action = int(prob) if rule.noise_sd == 0 else None
    else:
        u = np.random.Generator(np.random.Philox(int(seed))).random()
        action = int(u < prob)
    return DecisionOutcome(prob, action)


def equivalent_test_level(rule: DecisionRule) -> float:
    """Size of the one-sided test whose rejection coincides with the rule."""
    if rule.kind != NONRANDOMIZED or not rule.epsilon_star > 0:
        raise NotApplicable("only defined for nonrandomized rules with positive epsilon*")
    return float(norm_cdf(-rule.epsilon_star))


def cost_threshold(problem: PreparedProblem, outcomes=None, rule: DecisionRule | None = None) -> float:
    """Largest policy cost at which the rule still picks policy 1.

    Parameters
    ----------
    problem : PreparedProblem
        Geometry and smoothness; its own cost is ignored.
    outcomes : array_like, optional
        Outcomes before any cost is subtracted. Defaults to the problem's
        outcomes with its cost added back.
    rule : DecisionRule, optional
        A prebuilt rule for ``problem`` (weights do not depend on cost).
    """
    if rule is None:
        rule = build_rule(RDLipschitzProvider(problem))
    if rule.kind != NONRANDOMIZED or rule.sigma_star >= 1.0:
        raise RandomizedRule("no deterministic cost threshold for a randomized rule")
    if outcomes is None:
        outcomes = problem.y + problem.spec.cost * problem.d
    y = np.asarray(outcomes, float)
    if y.size != problem.n:
        raise DimensionMismatch("outcomes length differs from the number of units")
    w = rule.raw_weights
    wd = float(w @ problem.d)
    if not wd > 0:
        raise NotApplicable("treated units carry no positive weight")
    return float(w @ y) / wd


def wls_rule(design, covariance, contrast) -> DecisionRule:
    """Sign of the weighted-least-squares estimate of a linear contrast."""
    prov = LinearProvider(design, covariance, contrast)
    a = a_star()
    risk = a * prov.kappa * float(norm_cdf(-a))
    return DecisionRule(prov.wls_weights, 0.0, NONRANDOMIZED, 0.0, a, risk, "wls")


def plugin_rule(weights, label: str = "plugin") -> DecisionRule:
    """Nonrandomized rule that acts on the sign of a linear estimate."""
    return DecisionRule(np.asarray(weights, float), 0.0, NONRANDOMIZED, provider_id=label)


def direction_diagnostic(provider: ModulusProvider, grid=None) -> list[tuple[float, float]]:
    """Distance between the score direction at ``eps`` and its limit at 0.

    Returns ``(eps, distance / eps)`` pairs on a log grid. A bounded ratio as
    ``eps`` shrinks is numerical evidence that the direction converges at
    the rate rule synthesis assumes; it is not a proof.
    """
    if grid is None:
        grid = np.logspace(-6, -1, 11)
    S = provider.covariance
    s0 = provider.score(0.0)
    n0 = math.sqrt(float(s0 @ S @ s0))
    out = []
    for e in grid:
        s = provider.score(float(e))
        ns = math.sqrt(float(s @ S @ s))
        cos = float(s @ S @ s0) / (ns * n0)
        dist = math.sqrt(max(2.0 - 2.0 * cos, 0.0))
        out.append((float(e), dist / float(e)))
    return out
