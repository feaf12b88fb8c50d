"""Maximize a linear objective over a Euclidean ball intersected with a polytope.

The problem is::

    maximize    c @ theta
    subject to  ||M @ theta|| <= eps
                lo <= K @ theta <= hi      (rows with lo == hi are equalities)

It is solved by over-relaxed ADMM on the splitting ``z = (M theta, K theta)``:
the ball and the box each have a closed-form projection, and the linear
system ``(M'M + K'K) theta = rhs`` is factored once. Every so often the
current active set of the box is used to compute an exact candidate (the
"polish" step); the candidate is accepted only when it passes a full KKT
check, so the returned point carries an optimality certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .errors import Infeasible, SolverDiverged, Unbounded, ValidationError


@dataclass(frozen=True)
class ConicSolution:
    """Optimal point of :func:`maximize_over_ball_polytope`.

    Attributes
    ----------
    theta : ndarray
    value : float
        ``c @ theta``.
    ball_multiplier : float
        Multiplier ``nu`` of the ball constraint in
        ``c = nu * M'M theta / eps + K' mu``; it is the derivative of the
        optimal value with respect to ``eps``.
    row_multipliers : ndarray
        ``mu`` above (positive at an active upper bound).
    primal_residual, dual_residual : float
    iterations : int
    polished : bool
        True when the point came from the certified active-set step.
    """

    theta: np.ndarray
    value: float
    ball_multiplier: float
    row_multipliers: np.ndarray
    primal_residual: float
    dual_residual: float
    iterations: int
    polished: bool


def _project_ball(v, eps):
    nv = np.linalg.norm(v)
    if nv <= eps:
        return v
    return v * (eps / nv)


def _solve_at_zero(c, M, K, lo, hi):
    # eps = 0 turns the ball into M theta = 0: a plain LP
    n_par = c.size
    A_ub = np.vstack([K, -K]) if K.size else None
    b_ub = np.concatenate([hi, -lo]) if K.size else None
    res = optimize.linprog(
        -c, A_ub=A_ub, b_ub=b_ub, A_eq=M, b_eq=np.zeros(M.shape[0]),
        bounds=[(None, None)] * n_par, method="highs",
    )
    if res.status == 3:
        raise Unbounded("objective unbounded at eps = 0")
    if res.status == 2:
        raise Infeasible("constraints infeasible at eps = 0")
    if res.status != 0:
        raise SolverDiverged(f"linear program failed: {res.message}")
    theta = res.x
    return ConicSolution(theta, float(c @ theta), math.nan, np.zeros(K.shape[0]), 0.0, 0.0, int(res.nit), True)


def _polish(c, M, K, lo, hi, eps, at_lo, at_hi, tol):
    """Exact optimum for a guessed active set, or None if the guess fails KKT."""
    eq = lo == hi
    rows = at_lo | at_hi | eq
    n_par = c.size
    cscale = max(np.linalg.norm(c), 1e-300)
    bscale = 1.0 + float(np.max(np.abs(np.concatenate([lo[np.isfinite(lo)], hi[np.isfinite(hi)], [0.0]]))))

    A = K[rows]
    b = np.where(at_lo[rows] & ~at_hi[rows], lo[rows], hi[rows])
    if A.shape[0]:
        theta_p = np.linalg.lstsq(A, b, rcond=None)[0]
        if np.linalg.norm(A @ theta_p - b, np.inf) > tol * bscale:
            return None
        N = linalg.null_space(A)
    else:
        theta_p = np.zeros(n_par)
        N = np.eye(n_par)

    r0 = M @ theta_p
    if N.shape[1] == 0:
        theta = theta_p
    else:
        B = M @ N
        g = N.T @ c
        G = B.T @ B
        w, V = np.linalg.eigh(G)
        keep = w > 1e-12 * max(w.max(initial=0.0), 1e-300)
        gv = V.T @ g
        if np.linalg.norm(gv[~keep]) > 1e-10 * cscale:
            # objective grows along a direction the ball cannot see
            return None
        # centre of the face slice closest to the ball centre
        zc = -np.linalg.lstsq(B, r0, rcond=None)[0]
        res = r0 + B @ zc
        rad2 = eps * eps - float(res @ res)
        if rad2 < -tol * eps * eps:
            return None
        h = V[:, keep] @ (gv[keep] / w[keep])
        q = float(g @ h)
        if q > 1e-28 * cscale**2:
            eta = math.sqrt(max(rad2, 0.0) / q) * h
        else:
            eta = np.zeros_like(h)
        theta = theta_p + N @ (zc + eta)

    # feasibility
    Kt = K @ theta
    if np.any(Kt < lo - tol * bscale) or np.any(Kt > hi + tol * bscale):
        return None
    Mt = M @ theta
    nrm = np.linalg.norm(Mt)
    if nrm > eps * (1 + tol) + tol:
        return None

    # multipliers: c = nu * M'M theta / eps + A' mu
    grad = M.T @ Mt / eps
    cols = [grad[:, None], A.T] if A.shape[0] else [grad[:, None]]
    J = np.hstack(cols)
    lam = np.linalg.lstsq(J, c, rcond=None)[0]
    nu = float(lam[0])
    mu_rows = lam[1:]
    stat = np.linalg.norm(J @ lam - c)
    if stat > 1e-9 * cscale:
        return None
    sign_tol = 1e-9 * cscale
    if nu < -sign_tol:
        return None
    if nu > sign_tol and abs(nrm - eps) > tol * max(eps, 1.0):
        return None
    act_lo = at_lo[rows] & ~eq[rows]
    act_hi = at_hi[rows] & ~eq[rows]
    if np.any(mu_rows[act_hi] < -sign_tol) or np.any(mu_rows[act_lo] > sign_tol):
        return None
    mu = np.zeros(K.shape[0])
    mu[rows] = mu_rows
    return theta, max(nu, 0.0), mu, stat


def maximize_over_ball_polytope(c, M, K, lo, hi, eps, *, tol=1e-9, max_iter=100_000, polish_every=25,
                                relaxation=1.6) -> ConicSolution:
    """Maximize ``c @ theta`` subject to ``||M theta|| <= eps`` and ``lo <= K theta <= hi``.

    Parameters
    ----------
    c : (p,) array
    M : (m, p) array
    K : (k, p) array
    lo, hi : (k,) arrays
        Row bounds; use ``-inf``/``inf`` for one-sided rows.
    eps : float
        Ball radius, nonnegative.
    tol : float
        Primal and dual residual tolerance.
    max_iter : int
        Iteration cap; :class:`SolverDiverged` is raised beyond it.

    Returns
    -------
    ConicSolution
    """
    c = np.asarray(c, float)
    M = np.atleast_2d(np.asarray(M, float))
    K = np.asarray(K, float).reshape(-1, c.size)
    lo = np.asarray(lo, float).reshape(-1)
    hi = np.asarray(hi, float).reshape(-1)
    if eps < 0 or not math.isfinite(eps):
        raise ValidationError("eps must be finite and nonnegative")
    if np.any(lo > hi):
        raise Infeasible("row bounds cross")
    if eps == 0:
        return _solve_at_zero(c, M, K, lo, hi)

    p = c.size
    m = M.shape[0]
    A = np.vstack([M, K])
    try:
        chol = linalg.cho_factor(A.T @ A)
    except linalg.LinAlgError as exc:
        raise ValidationError("constraint map is not injective") from exc

    cn = np.linalg.norm(c)
    if cn == 0:
        theta = np.zeros(p)
        return ConicSolution(theta, 0.0, 0.0, np.zeros(K.shape[0]), 0.0, 0.0, 0, True)

    rho = cn / eps
    z = np.concatenate([np.zeros(m), np.clip(np.zeros(K.shape[0]), lo, hi)])
    u = np.zeros(m + K.shape[0])
    theta = np.zeros(p)
    best = None
    last_active = None
    r_norm = s_norm = math.inf

    for it in range(1, max_iter + 1):
        theta = linalg.cho_solve(chol, c / rho + A.T @ (z - u))
        At = A @ theta
        Ah = relaxation * At + (1 - relaxation) * z
        z_old = z
        v = Ah + u
        z = np.concatenate([_project_ball(v[:m], eps), np.clip(v[m:], lo, hi)])
        u = u + Ah - z

        r_norm = np.linalg.norm(At - z)
        s_norm = rho * np.linalg.norm(A.T @ (z - z_old))
        eps_pri = tol * (1 + max(np.linalg.norm(At), np.linalg.norm(z)))
        eps_dual = tol * (1 + rho * np.linalg.norm(A.T @ u))
        best = (theta, r_norm, s_norm)

        if it % polish_every == 0 or (r_norm <= eps_pri and s_norm <= eps_dual):
            zk = z[m:]
            at_lo = (zk <= lo) & np.isfinite(lo)
            at_hi = (zk >= hi) & np.isfinite(hi)
            key = (at_lo.tobytes(), at_hi.tobytes())
            if key != last_active:
                last_active = key
                out = _polish(c, M, K, lo, hi, eps, at_lo, at_hi, 1e-10)
                if out is not None:
                    th, nu, mu, stat = out
                    return ConicSolution(th, float(c @ th), nu, mu, 0.0, stat, it, True)

        if r_norm <= eps_pri and s_norm <= eps_dual:
            y = rho * u
            nu = float(np.linalg.norm(y[:m]))
            return ConicSolution(theta, float(c @ theta), nu, y[m:], r_norm, s_norm, it, False)

        if it % 50 == 0:
            # residual balancing; A'A does not depend on rho so no refactor
            if r_norm > 10 * s_norm:
                rho *= 2.0
                u /= 2.0
            elif s_norm > 10 * r_norm:
                rho /= 2.0
                u *= 2.0

    raise SolverDiverged(
        f"no convergence after {max_iter} iterations",
        best=best[0] if best else None,
        residuals={"primal": float(r_norm), "dual": float(s_norm)},
    )
