"""Modulus of continuity for the cutoff-change problem under Lipschitz smoothness.

Reduction used throughout
-------------------------
Only the observed values ``v_i = f(x_i, d_i)`` enter the likelihood. Given
them, the largest admissible value of the unobserved treated outcome at an
untreated point is the Lipschitz upper envelope of the treated arm, which
equals ``v[i+] + C (x+ - x_i)`` for every ``x_i`` below the smallest treated
point ``x+``. The welfare difference therefore becomes affine in ``v``::

    L = ell @ v + omega0,   ell[i+] = n_tilde / n,   ell[M] = -1 / n

and the modulus problem is a maximization of ``ell @ v`` over the weighted
ball ``||v / sigma|| <= eps`` intersected with adjacent-pair Lipschitz
constraints within each arm (in one dimension the chain implies all pairs).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PreparedProblem
from .errors import DegenerateDirection, InvalidEpsilon
from .solver import maximize_over_ball_polytope


@dataclass(frozen=True, eq=False)
class ModulusPoint:
    """Value of the modulus at one radius.

    ``f_values[i] = (f(x_i, 0), f(x_i, 1))`` for an attaining function, or
    ``None`` for analytic providers.
    """

    epsilon: float
    omega: float
    omega_prime: float
    f_values: np.ndarray | None = None
    method: str = "solver"

    def observed(self, d) -> np.ndarray:
        """Attaining values at the observed treatment status."""
        d = np.asarray(d, int)
        return self.f_values[np.arange(d.size), d]


@dataclass(frozen=True, eq=False)
class WStar:
    """Limit direction of the attaining signal, on noise-normalized outcomes."""

    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class RDProgram:
    """Matrices of the modulus program in the form used by the solver."""

    c: np.ndarray
    const: float
    M: np.ndarray
    K: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    constant_effect: bool


def _chain(x, idx):
    order = idx[np.argsort(x[idx], kind="stable")]
    return order[:-1], order[1:]


def rd_program(problem: PreparedProblem, constant_effect: bool = False) -> RDProgram:
    """Assemble ``(c, M, K, lo, hi)`` for the cutoff-change modulus.

    With ``constant_effect`` the parameter is ``(g_1..g_n, tau)`` with
    ``f(x, 0) = g(x)`` and ``f(x, 1) = g(x) + tau``.
    """
    n = problem.n
    x, d, s, C = problem.x, problem.d, problem.sigma, problem.lipschitz_c
    rows = []
    gaps = []
    if constant_effect:
        p = n + 1
        a, b = _chain(x, np.arange(n))
        for i, j in zip(a, b):
            r = np.zeros(p)
            r[j], r[i] = 1.0, -1.0
            rows.append(r)
            gaps.append(x[j] - x[i])
        M = np.zeros((n, p))
        M[np.arange(n), np.arange(n)] = 1.0 / s
        M[:, n] = d / s
        c = np.zeros(p)
        c[n] = problem.n_tilde / n
        const = 0.0
    else:
        p = n
        for arm in (0, 1):
            a, b = _chain(x, np.flatnonzero(d == arm))
            for i, j in zip(a, b):
                r = np.zeros(p)
                r[j], r[i] = 1.0, -1.0
                rows.append(r)
                gaps.append(x[j] - x[i])
        M = np.diag(1.0 / s)
        c = np.zeros(p)
        c[problem.affected] = -1.0 / n
        c[problem.i_plus_min] = problem.n_tilde / n
        const = problem.omega0
    K = np.array(rows).reshape(-1, p)
    bound = C * np.asarray(gaps, float)
    return RDProgram(c, const, M, K, -bound, bound, constant_effect)


def _reconstruct(problem: PreparedProblem, v: np.ndarray) -> np.ndarray:
    # extend observed values to both arms with Lipschitz envelopes
    x, d, C = problem.x, problem.d, problem.lipschitz_c
    f = np.empty((problem.n, 2))
    tr = np.flatnonzero(d == 1)
    un = np.flatnonzero(d == 0)
    f[tr, 1] = v[tr]
    f[un, 0] = v[un]
    dist = np.abs(x[:, None] - x[None, :])
    # treated outcome at untreated points: upper envelope of the treated arm
    f[un, 1] = np.min(v[tr][None, :] + C * dist[np.ix_(un, tr)], axis=1)
    # untreated outcome at treated points: any admissible value; pick the one nearest 0
    if un.size:
        hi_env = np.min(v[un][None, :] + C * dist[np.ix_(tr, un)], axis=1)
        lo_env = np.max(v[un][None, :] - C * dist[np.ix_(tr, un)], axis=1)
        f[tr, 0] = np.clip(0.0, lo_env, hi_env)
    return f


def _check_eps(epsilon):
    e = float(epsilon)
    if not e >= 0 or not math.isfinite(e):
        raise InvalidEpsilon(f"epsilon must be finite and nonnegative, got {epsilon!r}")
    return e


def solve_modulus(problem: PreparedProblem, epsilon: float, *, constant_effect: bool = False,
                  tol: float = 1e-9, max_iter: int = 100_000) -> ModulusPoint:
    """Solve the modulus program numerically.

    Parameters
    ----------
    problem : PreparedProblem
    epsilon : float
        Radius in noise-normalized units.
    constant_effect : bool
        Restrict to functions whose treatment effect is the same at every x.

    Returns
    -------
    ModulusPoint
    """
    eps = _check_eps(epsilon)
    prog = rd_program(problem, constant_effect)
    sol = maximize_over_ball_polytope(prog.c, prog.M, prog.K, prog.lo, prog.hi, eps, tol=tol, max_iter=max_iter)
    omega = sol.value + prog.const
    if constant_effect:
        g, tau = sol.theta[:-1], sol.theta[-1]
        f = np.column_stack([g, g + tau])
        point = ModulusPoint(eps, omega, sol.ball_multiplier, f, "solver")
    else:
        f = _reconstruct(problem, sol.theta)
        point = ModulusPoint(eps, omega, math.nan, f, "solver")
        if eps > 0:
            wp = omega_prime(problem, point)
        elif problem.epsilon_bar > 0:
            wp = problem.sigma_bar / problem.n
        else:
            # without smoothness the modulus is linear, so any radius gives the slope
            wp = solve_modulus(problem, 1.0, tol=tol, max_iter=max_iter).omega_prime
        point = ModulusPoint(eps, omega, wp, f, "solver")
    return point


def closed_form_modulus(problem: PreparedProblem, epsilon: float) -> ModulusPoint | None:
    """Affine closed form of the modulus, valid for ``epsilon <= problem.epsilon_bar``.

    Returns ``None`` beyond that radius, where the closed form is not
    guaranteed.
    """
    eps = _check_eps(epsilon)
    if eps > problem.epsilon_bar:
        return None
    n, C, sb = problem.n, problem.lipschitz_c, problem.sigma_bar
    x, s = problem.x, problem.sigma
    f = np.zeros((n, 2))
    f[problem.affected, 0] = -s[problem.affected] ** 2 * eps / sb
    below = x <= problem.x_plus_min
    f[below, 1] = C * (problem.x_plus_min - x[below]) + problem.n_tilde * problem.sigma_plus_min**2 * eps / sb
    omega = problem.omega0 + sb * eps / n
    # with C = 0 the form only covers eps = 0 and says nothing about the slope there
    slope = sb / n if problem.epsilon_bar > 0 else math.nan
    return ModulusPoint(eps, omega, slope, f, "closed_form")


def omega_prime(problem: PreparedProblem, point: ModulusPoint) -> float:
    """Derivative of the modulus from an attaining function.

    Uses ``eps / ((n / n_tilde) * sum_i d_i f(x_i, d_i) / sigma_i**2)``.
    """
    if point.f_values is None:
        raise DegenerateDirection("point carries no attaining function")
    if not point.epsilon > 0:
        raise InvalidEpsilon("the derivative formula needs epsilon > 0")
    d, s = problem.d, problem.sigma
    v = point.observed(d)
    denom = (problem.n / problem.n_tilde) * float(np.sum(d * v / s**2))
    if not denom > 0:
        raise DegenerateDirection("nonpositive denominator in derivative formula")
    return point.epsilon / denom


def w_star(problem: PreparedProblem) -> WStar:
    """Unit direction of the attaining signal as the radius shrinks to zero."""
    w = np.zeros(problem.n)
    w[problem.affected] = -problem.sigma[problem.affected] / problem.sigma_bar
    w[problem.i_plus_min] = problem.n_tilde * problem.sigma_plus_min / problem.sigma_bar
    return WStar(w)


def rho(problem: PreparedProblem, epsilon: float) -> float:
    """Largest welfare difference with the signal fixed at ``epsilon`` along ``w_star``.

    Defined for negative ``epsilon`` too.
    """
    return problem.omega0 + problem.sigma_bar * float(epsilon) / problem.n


def check_point(problem: PreparedProblem, point: ModulusPoint) -> dict:
    """Residuals of a point against its defining constraints.

    Returns a dict with the worst Lipschitz violation over all pairs in each
    arm, the relative gap between the signal norm and ``epsilon`` and the
    gap between ``omega`` and the welfare functional at ``f_values``.
    """
    f = point.f_values
    x = problem.x
    C = problem.lipschitz_c
    dx = np.abs(x[:, None] - x[None, :])
    lip = 0.0
    for arm in (0, 1):
        df = np.abs(f[:, arm][:, None] - f[:, arm][None, :])
        lip = max(lip, float(np.max(df - C * dx)))
    v = point.observed(problem.d)
    norm = float(np.sqrt(np.sum((v / problem.sigma) ** 2)))
    welfare = float(np.sum(problem.welfare_weights * (f[:, 1] - f[:, 0])))
    return {
        "lipschitz": max(lip, 0.0),
        "norm": abs(norm - point.epsilon) / max(point.epsilon, 1.0),
        "welfare": abs(welfare - point.omega),
    }
