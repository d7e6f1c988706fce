"""Parametric families: the channels everything else operates on.

A :class:`ParametricFamily` is a conditional model ``Q(y | theta)`` over a
finite, ordered outcome space, with ``theta`` ranging over a closed real
interval.  Families with infinite outcome support (Poisson, negative
binomial) are truncated so that the discarded tail mass stays below a
configurable tolerance, and every row is renormalized to sum to one.
Continuous-outcome families (normal with known variance) are binned.

Repeated independent trials are folded in through the sufficient statistic
(count of successes, sum of counts, sample mean), which keeps the outcome
space small as the trial count grows.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln, ndtr, xlogy
from scipy.stats import nbinom, poisson

from .errors import (
    DiagnosticWarning,
    DomainError,
    NumericError,
    UnsupportedReductionError,
)

__all__ = [
    "ParametricFamily",
    "ConstraintSpec",
    "bernoulli_family",
    "negative_binomial_family",
    "poisson_family",
    "normal_family",
    "matrix_family",
    "load_matrix_family",
    "cond_prob",
    "cond_entropy",
    "sufficient_reduce",
    "fisher_information",
    "jeffreys_weights",
    "THETA_SQUARED",
]

# Fisher information is computed by central finite differences of log Q;
# this is the base step size (scaled by |theta| for large parameters).
_FISHER_STEP = 1e-4


class ParametricFamily:
    """A one-parameter conditional model over a finite outcome space.

    Parameters
    ----------
    name : str
        Identifier used in configs and output files.
    theta_lo, theta_hi : float
        Closed parameter domain.
    outcome_values : array
        Strictly increasing represented values (or bin centers), one per
        outcome index ``0 .. n-1``.
    row_fn : callable
        ``row_fn(theta) -> array`` of raw (pre-renormalization) masses.
    rows_fn : callable, optional
        Vectorized variant, ``rows_fn(thetas) -> (len(thetas), n)`` array.
    trials : int
        Number of iid draws already folded in via the sufficient statistic.
    truncation_mass : float
        Upper bound on the probability discarded by support truncation,
        taken over the whole parameter domain (0 for finite-support models).
    reduce_fn : callable, optional
        ``reduce_fn(k) -> ParametricFamily`` producing the family of the
        sufficient statistic of ``k`` iid copies of this family.
    """

    def __init__(
        self,
        name: str,
        theta_lo: float,
        theta_hi: float,
        outcome_values: np.ndarray,
        row_fn: Callable[[float], np.ndarray],
        *,
        rows_fn: Callable[[np.ndarray], np.ndarray] | None = None,
        trials: int = 1,
        truncation_mass: float = 0.0,
        reduce_fn: Callable[[int], "ParametricFamily"] | None = None,
    ):
        if not theta_lo < theta_hi:
            raise ValueError("theta_lo must be strictly below theta_hi")
        values = np.asarray(outcome_values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("outcome_values must be a nonempty 1-D array")
        if values.size > 1 and not np.all(np.diff(values) > 0):
            raise ValueError("outcome_values must be strictly increasing")
        if trials < 1:
            raise ValueError("trials must be >= 1")
        if truncation_mass < 0:
            raise ValueError("truncation_mass must be >= 0")
        self.name = name
        self.theta_lo = float(theta_lo)
        self.theta_hi = float(theta_hi)
        self.outcome_values = values
        self.trials = int(trials)
        self.truncation_mass = float(truncation_mass)
        self._row_fn = row_fn
        self._rows_fn = rows_fn
        self._reduce_fn = reduce_fn
        values.setflags(write=False)

    # -- basic queries -------------------------------------------------

    @property
    def n_outcomes(self) -> int:
        return self.outcome_values.size

    @property
    def theta_range(self) -> float:
        return self.theta_hi - self.theta_lo

    def contains(self, theta: float) -> bool:
        return self.theta_lo <= theta <= self.theta_hi

    def require_in_domain(self, theta: float) -> None:
        if not self.contains(theta):
            raise DomainError(
                f"theta={theta!r} outside [{self.theta_lo}, {self.theta_hi}] "
                f"for family {self.name!r}"
            )

    def require_interior(self, theta: float) -> None:
        if not self.theta_lo < theta < self.theta_hi:
            raise DomainError(
                f"theta={theta!r} is not strictly interior to "
                f"[{self.theta_lo}, {self.theta_hi}] for family {self.name!r}"
            )

    # -- probability evaluation -----------------------------------------

    def row(self, theta: float) -> np.ndarray:
        """Renormalized pmf over the outcome space at ``theta``."""
        self.require_in_domain(theta)
        raw = self._row_fn(float(theta))
        return raw / raw.sum()

    def rows(self, thetas: np.ndarray) -> np.ndarray:
        """Renormalized pmf rows for an array of parameter values."""
        thetas = np.asarray(thetas, dtype=float)
        if thetas.size and (
            thetas.min() < self.theta_lo or thetas.max() > self.theta_hi
        ):
            raise DomainError(f"thetas outside domain for family {self.name!r}")
        if self._rows_fn is not None:
            raw = self._rows_fn(thetas)
        else:
            raw = np.stack([self._row_fn(float(t)) for t in thetas])
        return raw / raw.sum(axis=1, keepdims=True)

    def matrix(self, grid) -> np.ndarray:
        """Conditional probability matrix, one row per grid point."""
        return self.rows(np.asarray(grid, dtype=float))

    def __repr__(self) -> str:  # pragma: no cover - debugging aid
        return (
            f"ParametricFamily({self.name!r}, "
            f"domain=[{self.theta_lo}, {self.theta_hi}], "
            f"outcomes={self.n_outcomes}, trials={self.trials})"
        )


# ---------------------------------------------------------------------------
# Expense constraints (for variance-constrained capacity runs)
# ---------------------------------------------------------------------------


def THETA_SQUARED(theta):
    """Quadratic expense, the standard second-moment (power) constraint."""
    return np.square(theta)


@dataclass(frozen=True)
class ConstraintSpec:
    """Expense constraint entering the capacity iteration as a Lagrange term.

    ``expense`` maps parameter values to costs (vectorized); ``multiplier``
    is the nonnegative Lagrange weight; ``budget`` is the target expected
    expense, used only for reporting.
    """

    expense: Callable = THETA_SQUARED
    multiplier: float = 0.0
    budget: float | None = None
    name: str = "theta_squared"

    def __post_init__(self):
        if self.multiplier < 0:
            raise ValueError("constraint multiplier must be >= 0")


# ---------------------------------------------------------------------------
# Family constructors
# ---------------------------------------------------------------------------


def bernoulli_family(trials: int = 1) -> ParametricFamily:
    """Bernoulli success probability; ``trials`` draws reduce to the
    success count (binomial)."""
    k = int(trials)
    if k < 1:
        raise ValueError("trials must be >= 1")
    support = np.arange(k + 1, dtype=float)
    log_coef = gammaln(k + 1) - gammaln(support + 1) - gammaln(k - support + 1)

    def row_fn(theta: float) -> np.ndarray:
        if theta == 0.0:
            out = np.zeros(k + 1)
            out[0] = 1.0
            return out
        if theta == 1.0:
            out = np.zeros(k + 1)
            out[-1] = 1.0
            return out
        return np.exp(
            log_coef + support * np.log(theta) + (k - support) * np.log1p(-theta)
        )

    def rows_fn(thetas: np.ndarray) -> np.ndarray:
        t = thetas[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = log_coef + support * np.log(t) + (k - support) * np.log1p(-t)
        out = np.exp(logp)
        at0 = thetas == 0.0
        at1 = thetas == 1.0
        if at0.any():
            out[at0] = 0.0
            out[at0, 0] = 1.0
        if at1.any():
            out[at1] = 0.0
            out[at1, -1] = 1.0
        return out

    return ParametricFamily(
        "bernoulli",
        0.0,
        1.0,
        support,
        row_fn,
        rows_fn=rows_fn,
        trials=k,
        truncation_mass=0.0,
        reduce_fn=lambda extra: bernoulli_family(trials=k * extra),
    )


def negative_binomial_family(
    successes: int = 5,
    theta_lo: float = 0.1,
    theta_hi: float = 1.0,
    trials: int = 1,
    truncation_tol: float = 1e-10,
) -> ParametricFamily:
    """Failures observed before a fixed number of successes, with success
    probability ``theta``.  ``trials`` iid runs reduce to the total failure
    count, itself negative binomial with ``successes * trials`` successes.
    """
    if not 0.0 < theta_lo < theta_hi <= 1.0:
        raise ValueError("need 0 < theta_lo < theta_hi <= 1")
    r_total = int(successes) * int(trials)
    if r_total < 1:
        raise ValueError("successes and trials must be >= 1")

    # Tail mass is largest at the smallest success probability; scan a dense
    # parameter grid anyway so the truncation contract is checked literally.
    probe = np.linspace(theta_lo, theta_hi, 129)
    y_max = int(nbinom.isf(truncation_tol, r_total, theta_lo))
    while nbinom.sf(y_max, r_total, probe).max() > truncation_tol:
        y_max += 1
    support = np.arange(y_max + 1, dtype=float)
    log_coef = gammaln(support + r_total) - gammaln(r_total) - gammaln(support + 1)
    trunc = float(nbinom.sf(y_max, r_total, probe).max())

    def row_fn(theta: float) -> np.ndarray:
        if theta == 1.0:
            out = np.zeros(support.size)
            out[0] = 1.0
            return out
        return np.exp(log_coef + r_total * np.log(theta) + support * np.log1p(-theta))

    def rows_fn(thetas: np.ndarray) -> np.ndarray:
        t = thetas[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = log_coef + r_total * np.log(t) + support * np.log1p(-t)
        out = np.exp(logp)
        at1 = thetas == 1.0
        if at1.any():
            out[at1] = 0.0
            out[at1, 0] = 1.0
        return out

    return ParametricFamily(
        "negative_binomial",
        theta_lo,
        theta_hi,
        support,
        row_fn,
        rows_fn=rows_fn,
        trials=trials,
        truncation_mass=trunc,
        reduce_fn=lambda extra: negative_binomial_family(
            successes=successes,
            theta_lo=theta_lo,
            theta_hi=theta_hi,
            trials=trials * extra,
            truncation_tol=truncation_tol,
        ),
    )


def poisson_family(
    rate_lo: float = 0.0,
    rate_hi: float = 5.0,
    trials: int = 1,
    truncation_tol: float = 1e-10,
) -> ParametricFamily:
    """Poisson rate on a compact interval; ``trials`` iid counts reduce to
    their sum, Poisson with ``trials`` times the rate."""
    if not 0.0 <= rate_lo < rate_hi:
        raise ValueError("need 0 <= rate_lo < rate_hi")
    k = int(trials)
    if k < 1:
        raise ValueError("trials must be >= 1")

    probe = np.linspace(rate_lo, rate_hi, 129) * k
    y_max = int(poisson.isf(truncation_tol, k * rate_hi))
    while poisson.sf(y_max, probe).max() > truncation_tol:
        y_max += 1
    support = np.arange(y_max + 1, dtype=float)
    log_fact = gammaln(support + 1)
    trunc = float(poisson.sf(y_max, probe).max())

    def row_fn(theta: float) -> np.ndarray:
        rate = k * theta
        if rate == 0.0:
            out = np.zeros(support.size)
            out[0] = 1.0
            return out
        return np.exp(support * np.log(rate) - rate - log_fact)

    def rows_fn(thetas: np.ndarray) -> np.ndarray:
        rate = (k * thetas)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            logp = support * np.log(rate) - rate - log_fact
        out = np.exp(logp)
        at0 = thetas == 0.0
        if at0.any():
            out[at0] = 0.0
            out[at0, 0] = 1.0
        return out

    return ParametricFamily(
        "poisson",
        rate_lo,
        rate_hi,
        support,
        row_fn,
        rows_fn=rows_fn,
        trials=k,
        truncation_mass=trunc,
        reduce_fn=lambda extra: poisson_family(
            rate_lo=rate_lo,
            rate_hi=rate_hi,
            trials=k * extra,
            truncation_tol=truncation_tol,
        ),
    )


def normal_family(
    mean_lo: float = -15.0,
    mean_hi: float = 15.0,
    sigma: float = 1.0,
    trials: int = 1,
    bins: int = 256,
) -> ParametricFamily:
    """Normal mean with known standard deviation.  ``trials`` draws reduce
    to the sample mean, which is binned onto a uniform grid spanning the
    mean domain plus six standard errors on each side; each bin carries the
    integrated Gaussian mass."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    k = int(trials)
    if k < 1:
        raise ValueError("trials must be >= 1")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    scale = sigma / np.sqrt(k)
    edges = np.linspace(mean_lo - 6.0 * scale, mean_hi + 6.0 * scale, bins + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    trunc = float(2.0 * ndtr(-6.0))

    def row_fn(theta: float) -> np.ndarray:
        cdf = ndtr((edges - theta) / scale)
        return np.diff(cdf)

    def rows_fn(thetas: np.ndarray) -> np.ndarray:
        cdf = ndtr((edges[None, :] - thetas[:, None]) / scale)
        return np.diff(cdf, axis=1)

    return ParametricFamily(
        "normal",
        mean_lo,
        mean_hi,
        centers,
        row_fn,
        rows_fn=rows_fn,
        trials=k,
        truncation_mass=trunc,
        reduce_fn=lambda extra: normal_family(
            mean_lo=mean_lo,
            mean_hi=mean_hi,
            sigma=sigma,
            trials=k * extra,
            bins=bins,
        ),
    )


def matrix_family(
    probs,
    name: str = "custom",
    theta_values=None,
) -> ParametricFamily:
    """Explicit finite channel given as a row-stochastic matrix.

    Parameter values default to the row indices ``0 .. m-1``; an arbitrary
    real ``theta`` maps to the nearest row.  No sufficient-statistic
    reduction is available.
    """
    table = np.asarray(probs, dtype=float)
    if table.ndim != 2 or table.shape[0] < 1 or table.shape[1] < 1:
        raise ValueError("probs must be a 2-D matrix")
    if (table < 0).any() or (table > 1).any():
        raise ValueError("probabilities must lie in [0, 1]")
    sums = table.sum(axis=1)
    if np.abs(sums - 1.0).max() > 1e-9:
        raise ValueError("each row must sum to 1 within 1e-9")
    m, n = table.shape
    if theta_values is None:
        theta_values = np.arange(m, dtype=float)
    theta_values = np.asarray(theta_values, dtype=float)
    if theta_values.size != m or (m > 1 and not np.all(np.diff(theta_values) > 0)):
        raise ValueError("theta_values must be strictly increasing, one per row")
    table = table / sums[:, None]
    lo, hi = float(theta_values[0]), float(theta_values[-1] if m > 1 else theta_values[0] + 1.0)

    def nearest(theta: float) -> int:
        return int(np.argmin(np.abs(theta_values - theta)))

    def row_fn(theta: float) -> np.ndarray:
        return table[nearest(theta)]

    def rows_fn(thetas: np.ndarray) -> np.ndarray:
        idx = np.abs(theta_values[None, :] - thetas[:, None]).argmin(axis=1)
        return table[idx]

    return ParametricFamily(
        name,
        lo,
        hi,
        np.arange(n, dtype=float),
        row_fn,
        rows_fn=rows_fn,
        trials=1,
        truncation_mass=0.0,
        reduce_fn=None,
    )


def load_matrix_family(path) -> ParametricFamily:
    """Load a custom channel from a plain-text matrix file.

    Format: first line ``n_theta n_y``, then ``n_theta`` rows of ``n_y``
    probabilities; rows must sum to 1 within 1e-9.
    """
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing matrix header")
    try:
        m, n = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise ValueError(f"{path}: header must be two integers") from exc
    body = tokens[2:]
    if len(body) != m * n:
        raise ValueError(
            f"{path}: expected {m * n} probabilities, found {len(body)}"
        )
    try:
        table = np.array(body, dtype=float).reshape(m, n)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric matrix entry") from exc
    return matrix_family(table, name="custom")


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


def cond_prob(family: ParametricFamily, theta: float, y: int) -> float:
    """Renormalized conditional probability of outcome index ``y``."""
    if not 0 <= y < family.n_outcomes:
        raise ValueError(f"outcome index {y} outside 0..{family.n_outcomes - 1}")
    return float(family.row(theta)[int(y)])


def cond_entropy(family: ParametricFamily, theta: float) -> float:
    """Outcome entropy at ``theta`` in nats, with 0*log(0) taken as 0."""
    q = family.row(theta)
    return float(-xlogy(q, q).sum())


def sufficient_reduce(base: ParametricFamily, k: int) -> ParametricFamily:
    """Family of the sufficient statistic of ``k`` iid copies of ``base``.

    Mutual information computed on the reduced family equals the k-trial
    value up to truncation mass.  ``k == 1`` returns ``base`` itself.
    """
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return base
    if base._reduce_fn is None:
        raise UnsupportedReductionError(
            f"family {base.name!r} has no registered sufficient statistic"
        )
    return base._reduce_fn(k)


def fisher_information(family: ParametricFamily, theta: float) -> float:
    """Expected negative second derivative of the log-likelihood at ``theta``.

    Computed by central finite differences of ``log Q`` with step
    ``max(1e-4, 1e-4 * |theta|)``, shrunk if needed to stay inside the
    domain.  Outcomes whose probability underflows to zero anywhere in the
    stencil are skipped; they carry negligible weight.  A clearly negative
    result signals an unstable second difference and attaches a
    :class:`DiagnosticWarning`.
    """
    family.require_interior(theta)
    step = max(_FISHER_STEP, _FISHER_STEP * abs(theta))
    step = min(step, 0.5 * (theta - family.theta_lo), 0.5 * (family.theta_hi - theta))
    q0 = family.row(theta)
    qm = family.row(theta - step)
    qp = family.row(theta + step)
    mask = (q0 > 0) & (qm > 0) & (qp > 0)
    if not mask.any():
        raise NumericError(f"no usable outcomes for Fisher information at {theta}")
    d2 = (np.log(qm[mask]) - 2.0 * np.log(q0[mask]) + np.log(qp[mask])) / step**2
    value = float(-(q0[mask] * d2).sum())
    if value < -1e-6:
        warnings.warn(
            f"unstable second difference at theta={theta}: "
            f"Fisher information {value:.3e} < 0",
            DiagnosticWarning,
            stacklevel=2,
        )
    return value


def jeffreys_weights(family: ParametricFamily, grid) -> "PriorGrid":
    """Grid prior with weights proportional to the square root of the
    Fisher information."""
    from .infomath import PriorGrid

    grid = np.asarray(grid, dtype=float)
    info = np.array([fisher_information(family, t) for t in grid])
    if (info < -1e-6).any():
        bad = grid[info < -1e-6]
        raise NumericError(
            f"negative Fisher information at theta={bad.tolist()}; "
            "weights would be undefined"
        )
    info = np.clip(info, 0.0, None)
    weights = np.sqrt(info)
    total = weights.sum()
    if total <= 0:
        raise NumericError("Fisher information vanishes on the whole grid")
    return PriorGrid(grid, weights / total)
