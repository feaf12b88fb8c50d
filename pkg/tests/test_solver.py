import numpy as np
import pytest

from minimax_policy.errors import Infeasible, SolverDiverged, Unbounded
from minimax_policy.solver import maximize_over_ball_polytope

cp = pytest.importorskip("cvxpy")


def test_ball_only_points_along_objective():
    c = np.array([3.0, 4.0])
    sol = maximize_over_ball_polytope(c, np.eye(2), np.zeros((0, 2)), [], [], 2.0)
    np.testing.assert_allclose(sol.theta, [1.2, 1.6], atol=1e-10)
    assert sol.value == pytest.approx(10.0, abs=1e-10)
    # derivative of the value in eps is ||c||
    assert sol.ball_multiplier == pytest.approx(5.0, abs=1e-8)


def test_active_box_row():
    # maximize x + y on the unit disc with y <= 0.2
    c = np.array([1.0, 1.0])
    K = np.array([[0.0, 1.0]])
    sol = maximize_over_ball_polytope(c, np.eye(2), K, [-np.inf], [0.2], 1.0)
    np.testing.assert_allclose(sol.theta, [np.sqrt(1 - 0.04), 0.2], atol=1e-10)
    assert sol.polished
    assert sol.row_multipliers[0] > 0


def test_equality_rows():
    c = np.array([1.0, 0.0, 1.0])
    K = np.array([[1.0, -1.0, 0.0]])
    sol = maximize_over_ball_polytope(c, np.eye(3), K, [0.0], [0.0], 1.0)
    assert sol.theta[0] == pytest.approx(sol.theta[1], abs=1e-10)
    # x = y, so maximize x + z over 2x^2 + z^2 <= 1
    assert sol.value == pytest.approx(np.sqrt(1.5), abs=1e-9)


def test_zero_radius_is_a_linear_program():
    c = np.array([1.0, 1.0, 1.0])
    M = np.array([[1.0, -1.0, 0.0]])
    K = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    sol = maximize_over_ball_polytope(c, M, K, [-1, -1], [2, 0.5], 0.0)
    assert sol.value == pytest.approx(4.5)


def test_zero_radius_unbounded():
    with pytest.raises(Unbounded):
        maximize_over_ball_polytope(np.array([1.0, 1.0]), np.array([[1.0, -1.0]]), np.zeros((0, 2)), [], [], 0.0)


def test_crossing_bounds_infeasible():
    with pytest.raises(Infeasible):
        maximize_over_ball_polytope(np.ones(2), np.eye(2), np.eye(2), [1, 1], [0, 0], 1.0)


def test_diverged_carries_best_iterate():
    rng = np.random.default_rng(0)
    n = 20
    K = np.diff(np.eye(n), axis=0)
    with pytest.raises(SolverDiverged) as info:
        maximize_over_ball_polytope(rng.normal(size=n), np.eye(n), K, -0.01 * np.ones(n - 1), 0.01 * np.ones(n - 1),
                                    1.0, max_iter=3, polish_every=10**9)
    assert info.value.best is not None
    assert set(info.value.residuals) == {"primal", "dual"}


def test_matches_cvxpy_on_random_programs():
    rng = np.random.default_rng(5)
    for _ in range(30):
        p = int(rng.integers(3, 15))
        c = rng.normal(size=p)
        M = np.diag(rng.uniform(0.5, 2, p))
        K = rng.normal(size=(p, p))
        b = rng.uniform(0.1, 1.0, p)
        eps = float(rng.uniform(0.1, 3))
        sol = maximize_over_ball_polytope(c, M, K, -b, b, eps)
        th = cp.Variable(p)
        prob = cp.Problem(cp.Maximize(c @ th), [cp.norm(M @ th) <= eps, K @ th <= b, K @ th >= -b])
        prob.solve(solver="CLARABEL")
        assert sol.value == pytest.approx(prob.value, rel=1e-6, abs=1e-8)


def test_deterministic():
    rng = np.random.default_rng(1)
    c = rng.normal(size=8)
    K = np.diff(np.eye(8), axis=0)
    args = (c, np.eye(8), K, -0.1 * np.ones(7), 0.1 * np.ones(7), 0.7)
    a = maximize_over_ball_polytope(*args)
    b = maximize_over_ball_polytope(*args)
    np.testing.assert_array_equal(a.theta, b.theta)
