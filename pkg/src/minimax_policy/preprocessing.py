"""Variance estimation and a data-driven lower bound for the Lipschitz constant."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .core import Dataset
from .errors import InsufficientLocalData, TooFewUnits, ValidationError


class VarianceEstimate(NamedTuple):
    dataset: Dataset
    floored: np.ndarray
    """True where the raw estimate fell below the floor."""


def nn_variance(dataset: Dataset, neighbors: int = 3, floor_rel: float = 1e-6, *,
                return_flags: bool = False):
    """Nearest-neighbor variance estimates within each treatment arm.

    ``sigma_i**2 = J / (J + 1) * (y_i - mean of the J nearest same-arm neighbors)**2``.
    Neighbors are ranked by ``|x_i - x_j|``; ties go to the lower index.
    Estimates are floored at ``floor_rel`` times the sample sd of ``y``.

    Parameters
    ----------
    dataset : Dataset
        ``sigma`` is ignored if present.
    neighbors : int
    floor_rel : float
    return_flags : bool
        Also return which units hit the floor, so callers can drop them.

    Returns
    -------
    Dataset or VarianceEstimate
    """
    J = int(neighbors)
    if J < 1:
        raise ValidationError("neighbors must be at least 1")
    x, d, y = dataset.x, dataset.d, dataset.y
    var = np.empty(dataset.n)
    for arm in (0, 1):
        idx = np.flatnonzero(d == arm)
        if idx.size == 0:
            continue
        if idx.size < J + 1:
            raise TooFewUnits(f"arm d={arm} has {idx.size} units, need {J + 1}")
        xa, ya = x[idx], y[idx]
        for k in range(idx.size):
            dist = np.abs(xa - xa[k])
            dist[k] = np.inf
            # stable sort on distance keeps lower indices first among ties
            nb = np.argsort(dist, kind="stable")[:J]
            var[idx[k]] = J / (J + 1.0) * (ya[k] - ya[nb].mean()) ** 2
    sd_y = float(np.std(y, ddof=1)) if dataset.n > 1 else 0.0
    floor = floor_rel * (sd_y if sd_y > 0 else 1.0)
    sigma = np.sqrt(var)
    low = sigma < floor
    sigma = np.maximum(sigma, floor)
    out = Dataset(x, d, y, sigma)
    if return_flags:
        return VarianceEstimate(out, low)
    return out


def default_grid(dataset: Dataset, c0: float, step: float = 0.05) -> np.ndarray:
    """Evaluation points on a regular lattice inside each arm's data range."""
    pts = []
    for arm in (0, 1):
        xa = dataset.x[dataset.d == arm]
        if xa.size == 0:
            continue
        lo = math.ceil(xa.min() / step) * step
        hi = math.floor(xa.max() / step) * step
        if arm == 0:
            hi = min(hi, c0 - step)
        pts.append(np.arange(lo, hi + step / 2, step))
    return np.round(np.concatenate(pts), 12) if pts else np.array([])


def local_slopes(dataset: Dataset, c0: float, eval_grid, bandwidth: float | None = None) -> np.ndarray:
    """First-derivative estimates from local quadratic fits at each grid point.

    The fit at ``g`` uses units from the arm that ``g`` belongs to
    (``g >= c0`` means treated), with triangular kernel weights times
    ``1 / sigma**2`` when ``sigma`` is available. ``bandwidth`` defaults to
    one fifth of each arm's range.
    """
    grid = np.atleast_1d(np.asarray(eval_grid, float))
    if bandwidth is not None and not bandwidth > 0:
        raise ValidationError("bandwidth must be positive")
    x, d, y = dataset.x, dataset.d, dataset.y
    prec = 1.0 / dataset.sigma**2 if dataset.has_sigma else np.ones(dataset.n)
    out = np.empty(grid.size)
    for k, g in enumerate(grid):
        arm = int(g >= c0)
        idx = np.flatnonzero(d == arm)
        if idx.size == 0 or g < x[idx].min() or g > x[idx].max():
            raise ValidationError(f"grid point {g} lies outside the data range of its arm")
        h = bandwidth if bandwidth is not None else (x[idx].max() - x[idx].min()) / 5.0
        u = (x[idx] - g) / h
        inside = np.abs(u) < 1
        if inside.sum() < 3:
            raise InsufficientLocalData(f"fewer than 3 units within bandwidth of {g}")
        sel = idx[inside]
        wts = (1 - np.abs(u[inside])) * prec[sel]
        dx = x[sel] - g
        X = np.column_stack([np.ones(sel.size), dx, dx * dx])
        sw = np.sqrt(wts)
        coef, *_ = np.linalg.lstsq(X * sw[:, None], y[sel] * sw, rcond=None)
        out[k] = coef[1]
    return out


def lipschitz_lower_bound(dataset: Dataset, c0: float, eval_grid=None, bandwidth: float | None = None) -> float:
    """Largest absolute local slope over the grid.

    This estimates a lower bound for the Lipschitz constant. Taking the max
    over many noisy slopes biases it upward; no correction is applied.
    """
    if eval_grid is None:
        eval_grid = default_grid(dataset, c0)
    return float(np.max(np.abs(local_slopes(dataset, c0, eval_grid, bandwidth))))
