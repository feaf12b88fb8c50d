"""Domain types, problem preparation and normal-distribution helpers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy import optimize, special

from .errors import (
    DimensionMismatch,
    DuplicateRunningVariable,
    InconsistentTreatment,
    InvalidSpec,
    NoAffectedUnits,
    ValidationError,
)

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
#: phi(0), the standard normal density at the origin
PHI0 = INV_SQRT_2PI


# ---------------------------------------------------------------------------
# normal helpers

class NormalTriple(NamedTuple):
    pdf: float
    cdf: float
    mills: float


def norm_pdf(z):
    z = np.asarray(z, dtype=float)
    return INV_SQRT_2PI * np.exp(-0.5 * z * z)


def norm_cdf(z):
    """Standard normal cdf via the complementary error function.

    Accurate in both tails, unlike ``0.5 * (1 + erf(z / sqrt 2))``.
    """
    z = np.asarray(z, dtype=float)
    return 0.5 * special.erfc(-z / SQRT2)


def mills_ratio(z):
    """(1 - Phi(z)) / phi(z), computed with the scaled erfc."""
    z = np.asarray(z, dtype=float)
    return math.sqrt(math.pi / 2.0) * special.erfcx(z / SQRT2)


def normal_triple(z: float) -> NormalTriple:
    z = float(z)
    if not math.isfinite(z):
        raise ValidationError("z must be finite")
    return NormalTriple(
        INV_SQRT_2PI * math.exp(-0.5 * z * z),
        0.5 * math.erfc(-z / SQRT2),
        float(mills_ratio(z)),
    )


@lru_cache(maxsize=None)
def a_star() -> float:
    """Unique maximizer of a * Phi(-a) over a >= 0.

    It solves Phi(-a) = a * phi(a), i.e. mills(a) = a.
    """
    return optimize.brentq(lambda a: float(mills_ratio(a)) - a, 0.5, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


# ---------------------------------------------------------------------------
# data

def _as_vector(name, values, n=None):
    arr = np.array(values, dtype=float).reshape(-1)
    if n is not None and arr.size != n:
        raise DimensionMismatch(f"{name} has length {arr.size}, expected {n}")
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """Observed units.

    Parameters
    ----------
    x : array_like
        Running variable.
    d : array_like
        Treatment indicator (0 or 1).
    y : array_like
        Outcomes.
    sigma : array_like, optional
        Standard deviation of each outcome. ``None`` marks a dataset whose
        variances still have to be estimated (see
        :func:`minimax_policy.preprocessing.nn_variance`).
    """

    x: np.ndarray
    d: np.ndarray
    y: np.ndarray
    sigma: np.ndarray | None = None

    def __post_init__(self):
        x = _as_vector("x", self.x)
        n = x.size
        if n == 0:
            raise ValidationError("dataset is empty")
        d = _as_vector("d", self.d, n)
        y = _as_vector("y", self.y, n)
        if not np.all(np.isin(d, (0.0, 1.0))):
            raise ValidationError("d must be 0 or 1")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValidationError("x and y must be finite")
        s = None
        if self.sigma is not None:
            s = _as_vector("sigma", self.sigma, n)
            if not (np.all(np.isfinite(s)) and np.all(s > 0)):
                raise ValidationError("sigma must be positive and finite")
            s.setflags(write=False)
        for a in (x, d, y):
            a.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "d", d.astype(int))
        self.d.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "sigma", s)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def has_sigma(self) -> bool:
        return self.sigma is not None

    def with_outcomes(self, y) -> "Dataset":
        return Dataset(self.x, self.d, y, self.sigma)


@dataclass(frozen=True)
class PolicySpec:
    """Status-quo cutoff ``c0``, proposed cutoff ``c1 < c0``, cost and Lipschitz bound."""

    c0: float
    c1: float
    cost: float = 0.0
    lipschitz_c: float = 1.0

    def __post_init__(self):
        for name in ("c0", "c1", "cost", "lipschitz_c"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise InvalidSpec(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if not self.c1 < self.c0:
            raise InvalidSpec("c1 must be less than c0")
        if self.cost < 0:
            raise InvalidSpec("cost must be nonnegative")
        if self.lipschitz_c < 0:
            raise InvalidSpec("lipschitz_c must be nonnegative")


@dataclass(frozen=True, eq=False)
class PreparedProblem:
    """A dataset joined with a policy specification.

    Outcomes of treated units already have the cost subtracted. Build with
    :func:`prepare`; :meth:`with_lipschitz` swaps the smoothness bound while
    keeping the geometry.
    """

    dataset: Dataset
    spec: PolicySpec
    affected: np.ndarray
    n_tilde: int
    i_plus_min: int
    x_plus_min: float
    sigma_plus_min: float
    sigma_bar: float
    welfare_weights: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def x(self):
        return self.dataset.x

    @property
    def d(self):
        return self.dataset.d

    @property
    def y(self):
        return self.dataset.y

    @property
    def sigma(self):
        return self.dataset.sigma

    @property
    def lipschitz_c(self) -> float:
        return self.spec.lipschitz_c

    @property
    def sigma_max(self) -> float:
        return float(self.sigma.max())

    @property
    def min_gap(self) -> float:
        if self.n < 2:
            return math.inf
        return float(np.min(np.diff(np.sort(self.x))))

    @property
    def epsilon_bar(self) -> float:
        """Largest noise-normalized radius at which the affine closed form is guaranteed."""
        return self.lipschitz_c * self.min_gap / self.sigma_max

    @property
    def omega0(self) -> float:
        """Half-length of the identified set for the welfare difference."""
        gaps = self.x_plus_min - self.x[self.affected]
        return self.lipschitz_c * float(gaps.sum()) / self.n

    def with_lipschitz(self, c: float) -> "PreparedProblem":
        return replace(self, spec=replace(self.spec, lipschitz_c=c))


def _aggregate(dataset: Dataset) -> Dataset:
    # precision-weighted merge of units sharing (x, d)
    keys = {}
    for i, (xi, di) in enumerate(zip(dataset.x, dataset.d)):
        keys.setdefault((xi, int(di)), []).append(i)
    x, d, y, s = [], [], [], []
    for (xi, di), idx in keys.items():
        prec = 1.0 / dataset.sigma[idx] ** 2
        x.append(xi)
        d.append(di)
        y.append(float(np.dot(prec, dataset.y[idx]) / prec.sum()))
        s.append(float(prec.sum() ** -0.5))
    return Dataset(x, d, y, s)


def prepare(dataset: Dataset, spec: PolicySpec, *, aggregate_duplicates: bool = False) -> PreparedProblem:
    """Validate a dataset against a policy and cache the cutoff geometry.

    Parameters
    ----------
    dataset : Dataset
        Must carry ``sigma``.
    spec : PolicySpec
    aggregate_duplicates : bool
        Merge units that share a running-variable value instead of raising
        :class:`DuplicateRunningVariable`.

    Returns
    -------
    PreparedProblem
    """
    if not isinstance(dataset, Dataset):
        raise TypeError("prepare expects a Dataset; a PreparedProblem cannot be prepared again")
    if not dataset.has_sigma:
        raise ValidationError("dataset has no sigma column; estimate variances first")
    expected = (dataset.x >= spec.c0).astype(int)
    bad = np.flatnonzero(expected != dataset.d)
    if bad.size:
        raise InconsistentTreatment(f"unit {int(bad[0])} has d inconsistent with c0={spec.c0}")
    if np.unique(dataset.x).size != dataset.n:
        if not aggregate_duplicates:
            raise DuplicateRunningVariable("running variable values must be distinct")
        dataset = _aggregate(dataset)

    x, d, s = dataset.x, dataset.d, dataset.sigma
    affected = np.flatnonzero((x >= spec.c1) & (x < spec.c0))
    if affected.size == 0:
        raise NoAffectedUnits(f"no units with {spec.c1} <= x < {spec.c0}")
    treated = np.flatnonzero(d == 1)
    if treated.size == 0:
        raise ValidationError("no treated units")
    i_plus = int(treated[np.argmin(x[treated])])
    n_tilde = int(affected.size)
    sigma_bar = math.sqrt(n_tilde**2 * s[i_plus] ** 2 + float(np.sum(s[affected] ** 2)))

    y = dataset.y - spec.cost * d
    folded = Dataset(x, d, y, s)
    ww = np.zeros(dataset.n)
    ww[affected] = 1.0 / dataset.n
    ww.setflags(write=False)
    affected.setflags(write=False)
    return PreparedProblem(
        dataset=folded,
        spec=spec,
        affected=affected,
        n_tilde=n_tilde,
        i_plus_min=i_plus,
        x_plus_min=float(x[i_plus]),
        sigma_plus_min=float(s[i_plus]),
        sigma_bar=sigma_bar,
        welfare_weights=ww,
    )
