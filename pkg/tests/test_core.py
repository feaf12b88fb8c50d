import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minimax_policy import Dataset, PolicySpec, a_star, mills_ratio, norm_cdf, normal_triple, prepare
from minimax_policy.errors import (
    DuplicateRunningVariable,
    InconsistentTreatment,
    InvalidSpec,
    NoAffectedUnits,
    ValidationError,
)

from conftest import T1_D, T1_SIGMA, T1_X, make_t1, random_instance


def test_t1_geometry(t1):
    assert list(t1.affected) == [1]
    assert t1.n_tilde == 1
    assert t1.x_plus_min == 0.3
    assert t1.sigma_plus_min == 1.0
    assert t1.sigma_bar == pytest.approx(math.sqrt(2), abs=1e-15)
    assert t1.omega0 == pytest.approx(1 / 6, abs=1e-15)
    np.testing.assert_array_equal(t1.welfare_weights, [0, 1 / 3, 0])


def test_no_affected_units():
    with pytest.raises(NoAffectedUnits):
        make_t1(c1=-0.1)


def test_cost_folds_into_treated_outcomes():
    base = make_t1()
    folded = make_t1(cost=0.5)
    np.testing.assert_allclose(folded.y, base.y - np.array([0, 0, 0.5]))
    assert folded.sigma_bar == base.sigma_bar
    assert list(folded.affected) == list(base.affected)
    assert folded.x_plus_min == base.x_plus_min


def test_inconsistent_treatment():
    with pytest.raises(InconsistentTreatment):
        prepare(Dataset(T1_X, (0, 1, 1), (0, 0, 0), T1_SIGMA), PolicySpec(0, -0.3, 0, 1))


def test_duplicates_rejected_then_aggregated():
    ds = Dataset((-0.5, -0.2, -0.2, 0.3), (0, 0, 0, 1), (0.0, 1.0, 3.0, 0.4), (1.0, 1.0, 2.0, 1.0))
    spec = PolicySpec(0, -0.3, 0, 1)
    with pytest.raises(DuplicateRunningVariable):
        prepare(ds, spec)
    p = prepare(ds, spec, aggregate_duplicates=True)
    assert p.n == 3
    # precision weights 1 and 1/4
    assert p.y[1] == pytest.approx((1.0 * 1 + 3.0 * 0.25) / 1.25)
    assert p.sigma[1] == pytest.approx(1.25**-0.5)


@pytest.mark.parametrize("kw", [dict(c0=0, c1=0), dict(c0=0, c1=0.1), dict(c0=0, c1=-1, cost=-1),
                                dict(c0=0, c1=-1, lipschitz_c=-0.1), dict(c0=math.nan, c1=-1)])
def test_policy_spec_validation(kw):
    with pytest.raises(InvalidSpec):
        PolicySpec(**kw)


def test_dataset_validation():
    with pytest.raises(ValidationError):
        Dataset([], [], [], [])
    with pytest.raises(ValidationError):
        Dataset([0.0], [2], [0.0], [1.0])
    with pytest.raises(ValidationError):
        Dataset([0.0], [1], [0.0], [0.0])
    with pytest.raises(ValidationError):
        Dataset([0.0], [1], [math.inf], [1.0])


def test_prepared_problem_cannot_be_prepared_again(t1):
    with pytest.raises(TypeError):
        prepare(t1, t1.spec)


def test_prepare_is_idempotent():
    a, b = make_t1(cost=0.2), make_t1(cost=0.2)
    np.testing.assert_array_equal(a.y, b.y)
    assert a.sigma_bar == b.sigma_bar


def test_sigma_bar_matches_direct_sum(rng):
    for _ in range(50):
        p = random_instance(rng)
        direct = p.n_tilde**2 * p.sigma_plus_min**2 + sum(p.sigma[i] ** 2 for i in p.affected)
        assert p.sigma_bar**2 == pytest.approx(direct, rel=1e-14)


def test_normal_triple_at_zero():
    t = normal_triple(0.0)
    assert t.pdf == pytest.approx(0.3989422804014327, abs=1e-16)
    assert t.cdf == 0.5
    assert t.mills == pytest.approx(1.2533141373155003, abs=1e-15)


def test_normal_triple_reference_point():
    assert normal_triple(-0.7518).cdf == pytest.approx(0.22609, abs=5e-6)


@given(st.floats(-8, 8, allow_nan=False))
def test_cdf_symmetry_and_reference(z):
    assert norm_cdf(z) + norm_cdf(-z) == pytest.approx(1.0, abs=1e-14)
    ref = 0.5 * math.erfc(-z / math.sqrt(2))
    assert abs(float(norm_cdf(z)) - ref) <= 1e-14 * ref


def test_mills_against_high_precision():
    mpmath = pytest.importorskip("mpmath")
    mpmath.mp.dps = 40
    for z in np.linspace(-8, 8, 81):
        ref = (1 - mpmath.ncdf(z)) / mpmath.npdf(z)
        assert float(mills_ratio(z)) == pytest.approx(float(ref), rel=1e-13)


def test_mills_decreasing_and_positive():
    z = np.linspace(-8, 8, 2001)
    m = mills_ratio(z)
    assert np.all(m > 0)
    assert np.all(np.diff(m) < 0)


def test_a_star():
    a = a_star()
    assert a == pytest.approx(0.75179, abs=1e-5)
    assert abs(float(norm_cdf(-a)) - a * normal_triple(a).pdf) <= 1e-12
    assert float(norm_cdf(-a)) == pytest.approx(0.226, abs=5e-4)
    assert a_star() == a  # cached


def test_a_star_grid_maximizer():
    grid = np.linspace(0, 3, 10_001)
    vals = grid * norm_cdf(-grid)
    assert abs(grid[np.argmax(vals)] - a_star()) <= 1e-3
    # grid maximum value within 1e-6 of the value at a*
    assert a_star() * float(norm_cdf(-a_star())) - vals.max() <= 1e-6
    assert vals.max() <= a_star() * float(norm_cdf(-a_star())) + 1e-15


def test_with_lipschitz_keeps_geometry(t1):
    q = t1.with_lipschitz(2.0)
    assert q.lipschitz_c == 2.0
    assert q.omega0 == pytest.approx(2 * t1.omega0)
    assert q.sigma_bar == t1.sigma_bar
