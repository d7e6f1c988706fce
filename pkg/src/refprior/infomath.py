"""Information-theoretic and metric primitives.

All logarithms are natural; quantities are reported in nats.  The
``0 * log 0 := 0`` convention holds throughout: zero-probability outcomes
and zero-weight grid points contribute exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import xlogy

from .errors import GridMismatchError
from .family import ParametricFamily

__all__ = [
    "PriorGrid",
    "entropy",
    "marginal",
    "kl_divergence",
    "mutual_information",
    "ks_distance",
    "ks_samples_vs_grid",
]


@dataclass(frozen=True)
class PriorGrid:
    """A probability vector over an ordered finite grid of parameter values.

    Weights are validated (nonnegative, total within 1e-6 of one) and then
    normalized exactly, so downstream code can rely on a unit sum to
    machine precision.  Exact zeros are preserved by normalization.
    """

    grid: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("grid must be a nonempty 1-D array")
        if weights.shape != grid.shape:
            raise ValueError("grid and weights must have the same length")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ValueError("grid values must be strictly increasing")
        if weights.min() < -1e-15:
            raise ValueError("weights must be nonnegative")
        total = weights.sum()
        if not np.isfinite(total) or abs(total - 1.0) > 1e-6:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        weights = np.clip(weights, 0.0, None) / total
        grid.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return self.grid.size

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.weights)

    @classmethod
    def uniform(cls, grid) -> "PriorGrid":
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.full(grid.size, 1.0 / grid.size))

    @classmethod
    def point_mass(cls, grid, index: int) -> "PriorGrid":
        grid = np.asarray(grid, dtype=float)
        weights = np.zeros(grid.size)
        weights[index] = 1.0
        return cls(grid, weights)


def entropy(probs) -> float:
    """Shannon entropy of a probability vector, in nats."""
    p = np.asarray(probs, dtype=float)
    return float(-xlogy(p, p).sum())


def marginal(prior: PriorGrid, family: ParametricFamily) -> np.ndarray:
    """Outcome distribution induced by mixing the family rows by the prior."""
    return prior.weights @ family.matrix(prior.grid)


def kl_divergence(p, q) -> float:
    """KL divergence ``D(p || q)`` in nats.

    Returns ``inf`` (not an exception) when ``p`` puts mass where ``q``
    does not.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise GridMismatchError("distributions live on different outcome spaces")
    if ((q == 0) & (p > 0)).any():
        return float("inf")
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = np.where(p > 0, p * np.log(q), 0.0)
    return float((xlogy(p, p) - cross).sum())


def _kl_rows(matrix: np.ndarray, marg: np.ndarray) -> np.ndarray:
    """Per-row ``D(Q_theta || marg)``; rows violating absolute continuity
    get ``inf``."""
    with np.errstate(divide="ignore"):
        logm = np.where(marg > 0, np.log(np.where(marg > 0, marg, 1.0)), 0.0)
    kl = xlogy(matrix, matrix).sum(axis=1) - matrix @ logm
    dead = marg == 0
    if dead.any():
        bad = (matrix[:, dead] > 0).any(axis=1)
        kl[bad] = np.inf
    return kl


def _mutual_information_arrays(weights: np.ndarray, matrix: np.ndarray) -> float:
    marg = weights @ matrix
    kl = _kl_rows(matrix, marg)
    support = weights > 0
    return float(weights[support] @ kl[support])


def mutual_information(prior: PriorGrid, family: ParametricFamily) -> float:
    """Mutual information between the prior and the outcome, in nats.

    Equals the prior-weighted average of ``D(Q_theta || marginal)``; zero
    exactly when all positive-weight rows coincide.
    """
    return _mutual_information_arrays(prior.weights, family.matrix(prior.grid))


def _ks_weight_arrays(p: np.ndarray, q: np.ndarray) -> float:
    gap = np.abs(np.cumsum(p) - np.cumsum(q)).max()
    return float(min(max(gap, 0.0), 1.0))


def ks_distance(p: PriorGrid, q: PriorGrid) -> float:
    """Kolmogorov-Smirnov distance between two priors on the same grid."""
    if not np.array_equal(p.grid, q.grid):
        raise GridMismatchError("priors live on different grids")
    return _ks_weight_arrays(p.weights, q.weights)


def ks_samples_vs_grid(samples, prior: PriorGrid) -> float:
    """KS distance between an empirical sample CDF and a grid prior.

    The grid CDF is extended to the real line by linear interpolation
    between grid points (0 below the grid, 1 above), and the maximum
    one-sided gap is taken over the sorted sample points.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    if x.size == 0:
        raise ValueError("need at least one sample")
    ref = np.interp(x, prior.grid, prior.cdf(), left=0.0, right=1.0)
    n = x.size
    ecdf_hi = np.arange(1, n + 1) / n
    ecdf_lo = np.arange(0, n) / n
    gap = max(np.abs(ecdf_hi - ref).max(), np.abs(ref - ecdf_lo).max())
    return float(min(gap, 1.0))
