import math

import numpy as np
import pytest

from minimax_policy import (
    AffineProvider,
    Dataset,
    PolicySpec,
    RDLipschitzProvider,
    StoyeProvider,
    bias_variance,
    bias_weight_alpha,
    build_rule,
    closed_form_modulus,
    epsilon_mse,
    find_epsilon_star,
    frontier_estimator,
    make_provider,
    max_bias,
    minimax_mse_estimator,
    polynomial_wls_estimator,
    prepare,
)
from minimax_policy.errors import (
    BracketFailure,
    DegreeTooHigh,
    InvalidEpsilon,
    NotApplicable,
    RankDeficientDesign,
    ValidationError,
)

from conftest import make_t1, random_instance


def _linear():
    return make_provider("linear", [[1.0], [1.0], [1.0]], np.eye(3), [1.0])


# --- epsilon_mse -----------------------------------------------------------


def test_epsilon_mse_affine():
    assert epsilon_mse(AffineProvider(0.5, 1.0)) == pytest.approx(2.0, abs=1e-10)
    assert epsilon_mse(AffineProvider(0.2, 3.0)) == pytest.approx(15.0, abs=1e-9)


def test_epsilon_mse_point_identified():
    with pytest.raises(BracketFailure):
        epsilon_mse(_linear())


def test_epsilon_mse_residual(rng):
    for _ in range(10):
        prov = RDLipschitzProvider(random_instance(rng))
        e = epsilon_mse(prov)
        assert abs(e * e / (e * e + 1) - prov.omega_prime(e) * e / prov.omega(e)) <= 1e-10


def test_epsilon_star_below_epsilon_mse(rng):
    checked = 0
    for _ in range(40):
        prov = RDLipschitzProvider(random_instance(rng, c_range=(0.05, 5.0)))
        e_star = find_epsilon_star(prov)
        if e_star == 0:
            continue
        assert epsilon_mse(prov) - e_star > 1e-8
        checked += 1
    assert checked > 20
    assert epsilon_mse(StoyeProvider(1, 0.5)) - find_epsilon_star(StoyeProvider(1, 0.5)) > 1e-8


# --- bias / sd frontier ------------------------------------------------------


def test_bias_variance_examples():
    assert bias_variance(AffineProvider(0.5, 1.0), 0.7) == pytest.approx((0.5, 1.0))
    assert bias_variance(_linear(), 2.0).max_bias == 0.0
    with pytest.raises(InvalidEpsilon):
        bias_variance(_linear(), 0.0)


def test_frontier_monotone_t1(t1):
    prov = RDLipschitzProvider(t1)
    grid = np.linspace(0.02, 3.0, 50)
    bv = np.array([bias_variance(prov, e) for e in grid])
    assert np.all(bv >= 0)
    assert np.all(np.diff(bv[:, 0]) >= -1e-8)
    assert np.all(np.diff(bv[:, 1]) <= 1e-8)


def test_frontier_estimator_reports_its_own_bias_and_sd(rng):
    for _ in range(10):
        p = random_instance(rng, n_range=(5, 20))
        prov = RDLipschitzProvider(p)
        eps = float(rng.uniform(0.1, 3.0))
        est = frontier_estimator(prov, eps)
        assert math.sqrt(float(np.sum(est.raw_weights**2 * p.sigma**2))) == pytest.approx(est.sd, rel=1e-6)
        assert max_bias(p, est.raw_weights) == pytest.approx(est.max_bias, rel=1e-5, abs=1e-8)


def test_frontier_optimality_spot_check():
    rng = np.random.default_rng(3)
    x = np.array([-0.8, -0.45, -0.2, -0.05, 0.15, 0.5])
    d = (x >= 0).astype(int)
    sigma = rng.uniform(0.5, 1.5, 6)
    p = prepare(Dataset(x, d, np.zeros(6), sigma), PolicySpec(0.0, -0.5, 0.0, 1.0))
    prov = RDLipschitzProvider(p)
    for eps, draws in ((0.3, 2_000), (1.0, 10_000), (2.5, 2_000)):
        est = frontier_estimator(prov, eps)
        dirs = rng.normal(size=(draws, 6))
        dirs /= np.sqrt(np.sum(dirs**2 * sigma**2, axis=1))[:, None]
        # sd(dir) = 1, so scaling by est.sd gives an estimator with the same sd
        worst = min(max_bias(p, est.sd * w) for w in dirs)
        assert worst >= est.max_bias - 1e-6


def test_worst_case_mse_minimized_at_epsilon_mse(rng):
    for _ in range(5):
        prov = RDLipschitzProvider(random_instance(rng))
        e = epsilon_mse(prov)
        mse = lambda t: sum(v * v for v in bias_variance(prov, t))
        best = mse(e)
        for t in e * np.linspace(0.8, 1.2, 21):
            assert mse(t) >= best - 1e-10


# --- minimax MSE estimator -------------------------------------------------


def test_mse_estimator_t1_closed_form_region():
    p = make_t1(c=4.0)
    est = minimax_mse_estimator(RDLipschitzProvider(p))
    assert est.epsilon <= p.epsilon_bar
    v = closed_form_modulus(p, est.epsilon).observed(p.d)
    expected = (p.sigma_bar / p.n) / est.epsilon * v / p.sigma**2
    np.testing.assert_allclose(est.raw_weights, expected, atol=1e-12)
    assert est.estimate(np.zeros(3)) == 0.0


def test_mse_estimator_zero_smoothness_is_difference_in_means():
    x = [-0.7, -0.3, 0.2, 0.6]
    d = [0, 0, 1, 1]
    sigma = np.array([1.0, 2.0, 0.5, 1.0])
    y = np.array([0.3, -0.2, 1.1, 0.4])
    p = prepare(Dataset(x, d, y, sigma), PolicySpec(0.0, -0.5, 0.0, 0.0))
    est = minimax_mse_estimator(RDLipschitzProvider(p), constant_effect=True)
    prec = 1 / sigma**2
    treated = prec[2:] @ y[2:] / prec[2:].sum()
    control = prec[:2] @ y[:2] / prec[:2].sum()
    assert est.estimate(y) == pytest.approx(0.25 * (treated - control), abs=1e-6)
    assert est.max_bias == 0.0 and math.isinf(est.epsilon)
    assert est.label == "mse_constant_effect"


def test_mse_constant_effect_needs_rd():
    with pytest.raises(ValidationError):
        minimax_mse_estimator(StoyeProvider(1, 0.5), constant_effect=True)


def test_constant_effect_bias_no_larger(rng):
    # the restricted class is smaller, so its modulus and bias are smaller
    for _ in range(5):
        p = random_instance(rng, n_range=(5, 20))
        a = RDLipschitzProvider(p).omega(1.0)
        b = RDLipschitzProvider(p, constant_effect=True).omega(1.0)
        assert b <= a + 1e-9


# --- polynomial plug-in --------------------------------------------------------


def test_polynomial_degree_zero_t1(t1):
    est = polynomial_wls_estimator(t1, 0)
    assert est.estimate(t1.y) == pytest.approx((0.4 - 0.15) / 3, abs=1e-12)
    assert est.estimate(np.full(3, 2.5)) == pytest.approx(0.0, abs=1e-12)


def test_polynomial_errors(t1):
    with pytest.raises(DegreeTooHigh):
        polynomial_wls_estimator(t1, 1)
    with pytest.raises(ValidationError):
        polynomial_wls_estimator(t1, -1)
    x = [-0.9, -0.6, -0.3, -0.1, 0.4]
    p = prepare(Dataset(x, [0, 0, 0, 0, 1], np.zeros(5), np.ones(5)), PolicySpec(0.0, -0.5, 0.0, 1.0))
    with pytest.raises(RankDeficientDesign):
        polynomial_wls_estimator(p, 1)


@pytest.mark.parametrize("degree", [0, 1, 2, 3])
def test_polynomial_exact_on_polynomial_truth(rng, degree):
    n = 30
    x = np.sort(rng.uniform(-1, 1, n))
    d = (x >= 0.1).astype(int)
    a, b = rng.normal(size=degree + 1), rng.normal(size=degree + 1)
    f0 = np.polynomial.polynomial.polyval(x, a)
    tau = np.polynomial.polynomial.polyval(x, b)
    y = f0 + d * tau
    p = prepare(Dataset(x, d, y, rng.uniform(0.5, 2, n)), PolicySpec(0.1, -0.4, 0.0, 1.0))
    est = polynomial_wls_estimator(p, degree)
    truth = float(p.welfare_weights @ tau)
    assert est.estimate(y) == pytest.approx(truth, abs=1e-9)
    assert est.estimate(np.zeros(n)) == 0.0
    for k in range(degree + 1):
        assert est.estimate(x**k) == pytest.approx(0.0, abs=1e-9)


# --- bias weight alpha -----------------------------------------------------


def test_alpha_stoye():
    prov = StoyeProvider(1, 0.5)
    e = find_epsilon_star(prov)
    assert bias_weight_alpha(prov) == pytest.approx(1 / (1 + 0.5 * e), abs=1e-12)


def test_alpha_half_at_epsilon_mse(rng):
    prov = RDLipschitzProvider(random_instance(rng))
    assert bias_weight_alpha(prov, epsilon_mse(prov)) == pytest.approx(0.5, abs=1e-8)


def test_alpha_stationarity_t1(t1):
    prov = RDLipschitzProvider(t1)
    e = find_epsilon_star(prov)
    alpha = bias_weight_alpha(prov)
    assert 0.5 <= alpha <= 1.0
    h = 1e-4

    def objective(t):
        b, s = bias_variance(prov, t)
        return alpha * b * b + (1 - alpha) * s * s

    slope = (objective(e + h) - objective(e - h)) / (2 * h)
    assert abs(slope) <= 1e-6
    b, s = bias_variance(prov, e)
    assert abs(-alpha * b * e + (1 - alpha) * s) <= 1e-8


def test_alpha_range(rng):
    for _ in range(20):
        prov = RDLipschitzProvider(random_instance(rng, c_range=(0.05, 3.0)))
        if build_rule(prov).kind != "nonrandomized":
            continue
        assert 0.5 <= bias_weight_alpha(prov) <= 1.0


def test_alpha_not_applicable():
    with pytest.raises(NotApplicable):
        bias_weight_alpha(_linear())
    with pytest.raises(NotApplicable):
        bias_weight_alpha(StoyeProvider(1, 0.5, 0.3))
