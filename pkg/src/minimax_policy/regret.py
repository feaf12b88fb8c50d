"""Worst-case and simulated regret of decision rules.

Worst-case regret of a linear rule
----------------------------------
Let ``u`` be the unit direction of the rule's statistic on noise-normalized
outcomes and ``xi`` its artificial noise relative to the statistic's sd.
For a function whose signal has ``u @ m = e``, the rule picks the wrong
policy with probability ``Phi(-e / sqrt(1 + xi**2))`` when ``L > 0``.
Mapping ``f -> -f`` covers ``L < 0`` with ``-e``, so the worst-case regret is
``sup_e max(rho_u(e), 0) * Phi(-e / sqrt(1 + xi**2))`` where
``rho_u(e) = sup {L(f) : u @ m(f) = e}``. ``rho_u`` is concave, so the
product is log-concave on the set where it is positive and a bracketed
golden-section search finds its maximum.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize

from .core import PreparedProblem, a_star, norm_cdf
from .errors import (
    DimensionMismatch,
    Infeasible,
    InvalidInterval,
    SolverDiverged,
    Unbounded,
    ValidationError,
)
from .modulus import ModulusPoint, rd_program
from .providers import RDLipschitzProvider
from .rules import DecisionRule, build_rule

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def worker_count() -> int:
    """Thread cap from ``MINIMAX_POLICY_THREADS`` (default: CPU count)."""
    raw = os.environ.get("MINIMAX_POLICY_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValidationError("MINIMAX_POLICY_THREADS must be an integer") from None
    return os.cpu_count() or 1


def parallel_map(fn, items):
    items = list(items)
    k = min(worker_count(), len(items))
    if k <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True, eq=False)
class RegretReport:
    """Worst-case regret of a rule with the profile that located it.

    ``max_regret`` is ``inf`` when the welfare gap the rule can miss is
    unbounded over the class.
    """

    rule_id: str
    max_regret: float
    argmax_epsilon: float
    curve: list = field(default_factory=list, repr=False)

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.max_regret)


def _linprog(c, A_ub, b_ub, A_eq, b_eq):
    res = optimize.linprog(-c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                           bounds=[(None, None)] * c.size, method="highs")
    if res.status == 2:
        raise Infeasible(res.message)
    if res.status == 3:
        raise Unbounded(res.message)
    if res.status != 0:
        raise SolverDiverged(f"linear program failed: {res.message}")
    return -res.fun


def _chain_system(problem):
    prog = rd_program(problem)
    if prog.K.size:
        return prog, np.vstack([prog.K, -prog.K]), np.concatenate([prog.hi, -prog.lo])
    return prog, None, None


def rho_w(problem: PreparedProblem, weights, epsilon: float) -> float:
    """Largest welfare difference with ``weights @ (m / sigma) = epsilon``.

    Parameters
    ----------
    weights : array_like
        Direction on noise-normalized outcomes.

    Raises
    ------
    Infeasible
        If no admissible function produces that signal.
    Unbounded
        If the welfare difference is unbounded on the hyperplane.
    """
    w = np.asarray(weights, float).reshape(-1)
    if w.size != problem.n:
        raise DimensionMismatch("weights length differs from the number of units")
    prog, A_ub, b_ub = _chain_system(problem)
    a = (w / problem.sigma)[None, :]
    return _linprog(prog.c, A_ub, b_ub, a, np.array([float(epsilon)])) + prog.const


def max_bias(problem: PreparedProblem, raw_weights) -> float:
    """Worst-case bias of the estimator ``raw_weights @ Y`` over the class.

    ``inf`` if the bias is unbounded.
    """
    w = np.asarray(raw_weights, float).reshape(-1)
    if w.size != problem.n:
        raise DimensionMismatch("weights length differs from the number of units")
    prog, A_ub, b_ub = _chain_system(problem)
    try:
        return max(_linprog(prog.c - w, A_ub, b_ub, None, None) + prog.const, 0.0)
    except Unbounded:
        return math.inf


def _golden_max(F, a, b, tol):
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = F(c), F(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = F(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = F(d)
    return (c, fc) if fc >= fd else (d, fd)


def maximize_regret_profile(rho_fn, noise_ratio: float = 0.0, *, tol: float = 1e-8, grid_points: int = 64,
                            max_doublings: int = 40):
    """Maximize ``max(rho(e), 0) * Phi(-e / sqrt(1 + noise_ratio**2))`` over real ``e``.

    ``rho_fn`` must be concave where finite and may raise :class:`Infeasible`
    (treated as no admissible function) or :class:`Unbounded`.

    Returns
    -------
    (value, argmax, curve)
    """
    s_w = math.sqrt(1.0 + noise_ratio**2)
    cache = {}

    def F(e):
        e = float(e)
        if e not in cache:
            try:
                r = rho_fn(e)
            except Infeasible:
                r = -math.inf
            cache[e] = max(r, 0.0) * float(norm_cdf(-e / s_w))
        return cache[e]

    f0 = F(0.0)
    # expand each side until the profile has decreased three times in a row
    bounds = []
    for sign in (1.0, -1.0):
        e, prev, drops, k = 1.0, f0, 0, 0
        while drops < 3 and k < max_doublings:
            val = F(sign * e)
            drops = drops + 1 if val <= prev else 0
            prev, e, k = val, 2 * e, k + 1
        bounds.append(sign * e / 2)
    hi, lo = bounds
    grid = np.linspace(lo, hi, grid_points)
    vals = np.array([F(g) for g in grid])
    j = int(np.argmax(vals))
    a = grid[max(j - 1, 0)]
    b = grid[min(j + 1, grid_points - 1)]
    e_best, f_best = _golden_max(F, a, b, tol)
    if vals[j] > f_best:
        e_best, f_best = grid[j], vals[j]
    return float(f_best), float(e_best), sorted(cache.items())


def max_regret(problem: PreparedProblem, rule: DecisionRule, *, tol: float = 1e-8) -> RegretReport:
    """Worst-case regret of ``rule`` over the Lipschitz class of ``problem``."""
    w_raw = np.asarray(rule.raw_weights, float)
    if w_raw.size != problem.n:
        raise DimensionMismatch("rule weights do not match the problem")
    wt = w_raw * problem.sigma
    t = float(np.linalg.norm(wt))
    rid = rule.provider_id or rule.kind
    if t == 0:
        # the statistic is constant, so the rule ignores the data and the
        # welfare gap it misses is unbounded over the class
        return RegretReport(rid, math.inf, math.nan, [])
    u = wt / t
    try:
        value, arg, curve = maximize_regret_profile(lambda e: rho_w(problem, u, e), rule.noise_sd / t, tol=tol)
    except Unbounded:
        return RegretReport(rid, math.inf, math.nan, [])
    return RegretReport(rid, value, arg, curve)


class Truth(NamedTuple):
    """Signal means of the observed outcomes and the welfare difference they imply."""

    mean: np.ndarray
    welfare: float


def truth_from_point(problem: PreparedProblem, point: ModulusPoint, sign: float = 1.0) -> Truth:
    """Truth attaining the modulus at ``point`` (or its mirror image for ``sign=-1``)."""
    f = point.f_values * sign
    welfare = float(problem.welfare_weights @ (f[:, 1] - f[:, 0]))
    return Truth(point.observed(problem.d) * sign, welfare)


class MonteCarloResult(NamedTuple):
    regret: float
    se: float


def monte_carlo_regret(rule: DecisionRule, truth: Truth, sigma, draws: int, seed: int,
                       chunk: int = 20_000) -> MonteCarloResult:
    """Simulated regret of ``rule`` at a fixed truth.

    Uses the rule's choice probability in place of a sampled action, which
    has the same mean and a smaller variance.
    """
    mean = np.asarray(truth.mean, float)
    sigma = np.asarray(sigma, float)
    if mean.size != rule.raw_weights.size or sigma.size != mean.size:
        raise DimensionMismatch("truth, sigma and rule sizes differ")
    if draws < 1:
        raise ValidationError("draws must be at least 1")
    L = float(truth.welfare)
    gen = np.random.Generator(np.random.Philox(int(seed)))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < draws:
        k = min(chunk, draws - done)
        Y = mean + sigma * gen.standard_normal((k, mean.size))
        stat = Y @ rule.raw_weights
        if rule.noise_sd > 0:
            p = norm_cdf(stat / rule.noise_sd)
        else:
            p = (stat >= 0).astype(float)
        loss = L * (1.0 - p) if L >= 0 else -L * p
        total += float(loss.sum())
        total_sq += float((loss * loss).sum())
        done += k
    m = total / draws
    var = max(total_sq / draws - m * m, 0.0)
    se = math.sqrt(var / max(draws - 1, 1))
    return MonteCarloResult(m, se)


def univariate_minimax_risk(tau0: float, tau1: float, sigma: float) -> float:
    """Minimax regret when the welfare difference equals the mean of one normal draw.

    The mean is known to satisfy ``tau0 <= |mean| <= tau1``.
    """
    if not (0 <= tau0 <= tau1 and tau1 > 0 and sigma > 0):
        raise InvalidInterval("need 0 <= tau0 <= tau1, tau1 > 0 and sigma > 0")
    a = a_star() * sigma
    if tau1 < a:
        return tau1 * float(norm_cdf(-tau1 / sigma))
    if a < tau0:
        return tau0 * float(norm_cdf(-tau0 / sigma))
    return a * float(norm_cdf(-a_star()))


class SweepPoint(NamedTuple):
    true_c: float
    max_regret: float
    oracle_regret: float


def _default_rule(problem):
    return build_rule(RDLipschitzProvider(problem))


def misspecification_sweep(problem_builder: Callable[[float], PreparedProblem], c_spec: float, true_c_grid,
                           rule_factory: Callable[[PreparedProblem], DecisionRule] | None = None) -> list[SweepPoint]:
    """Worst-case regret of a rule built at ``c_spec`` when the true bound differs.

    Each point also carries the oracle value: the worst-case regret of the
    rule rebuilt at the true bound.
    """
    grid = [float(c) for c in true_c_grid]
    if not grid:
        raise ValidationError("true_c_grid is empty")
    factory = rule_factory or _default_rule
    rule = factory(problem_builder(c_spec))

    def one(c):
        prob = problem_builder(c)
        r = max_regret(prob, rule).max_regret
        oracle = r if c == c_spec else max_regret(prob, factory(prob)).max_regret
        return SweepPoint(c, r, oracle)

    return parallel_map(one, grid)
