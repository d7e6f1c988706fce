"""Finite-grid stochastic iteration with common random numbers.

Drawing ``N`` values from a grid prior can be seen as applying an operator
to the prior: assign each of ``N`` fixed unit uniforms to a grid cell by
inverse-CDF lookup and return the empirical frequencies.  Reusing one fixed
uniform stream for every draw couples the stochastic error across
iterations instead of letting it accumulate: the per-draw KS error is
bounded by the stream's own empirical-CDF deviation, uniformly over priors.

Combined with a Lipschitz factor ``beta`` for the update map, the error
after ``n`` alternating draw/update steps is at most the per-draw error
times ``1 + beta + ... + beta**n``, which turns a confidence radius into an
explicit stream-size requirement.  :func:`coverage_study` checks that
requirement empirically over independent replications.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DiagnosticWarning, InfeasibleSampleBoundError
from .family import ConstraintSpec, ParametricFamily
from .infomath import PriorGrid, ks_distance
from .ba_grid import BOUNDARY_CLAMP, _clamp_weights, _step_weights, estimate_lipschitz

__all__ = [
    "UniformStream",
    "StochasticRunResult",
    "CoverageResult",
    "draw_common",
    "growth_factor",
    "sample_bound",
    "stochastic_iterate",
    "coverage_study",
]


@dataclass(frozen=True)
class UniformStream:
    """A fixed batch of unit uniforms reused for every draw in a run."""

    values: np.ndarray
    seed: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("stream must be a nonempty 1-D array")
        if values.min() < 0.0 or values.max() > 1.0:
            raise ValueError("stream values must lie in [0, 1]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_sorted", np.sort(values))

    def __len__(self) -> int:
        return self.values.size

    @property
    def sorted_values(self) -> np.ndarray:
        return self._sorted

    @classmethod
    def from_seed(cls, seed: int, n: int) -> "UniformStream":
        return cls(np.random.default_rng(seed).random(n), seed)

    def empirical_cdf_deviation(self) -> float:
        """Exact KS deviation of the stream from the uniform CDF."""
        n = len(self)
        u = self._sorted
        hi = np.abs(np.arange(1, n + 1) / n - u).max()
        lo = np.abs(u - np.arange(0, n) / n).max()
        return float(max(hi, lo))


def draw_common(p: PriorGrid, stream: UniformStream) -> PriorGrid:
    """Empirical distribution of ``len(stream)`` inverse-CDF draws from ``p``.

    Uniform ``u`` maps to the first grid cell whose cumulative weight
    exceeds it, with the last cell closed at 1.  Deterministic given the
    prior and the stream.
    """
    cum = np.cumsum(p.weights)
    counts_below = np.searchsorted(stream.sorted_values, cum, side="left")
    counts_below[-1] = len(stream)
    counts = np.diff(counts_below, prepend=0)
    return PriorGrid(p.grid, counts / len(stream))


def growth_factor(beta: float, n: int) -> float:
    """Partial geometric sum ``1 + beta + ... + beta**n``: the factor by
    which one draw's KS error can amplify over ``n`` update steps."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if n < 0:
        raise ValueError("n must be >= 0")
    if beta == 1.0:
        return float(n + 1)
    d = beta - 1.0
    return float(np.expm1((n + 1) * np.log1p(d)) / d)


def sample_bound(epsilon: float, alpha: float, beta: float, n: int) -> int:
    """Smallest stream size guaranteeing, with probability ``1 - alpha``,
    that the stochastic iterate stays within KS radius ``epsilon`` of the
    deterministic one after ``n`` steps."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    gamma = growth_factor(beta, n)
    bound = gamma * gamma * math.log(2.0 / alpha) / (2.0 * epsilon * epsilon)
    return max(1, math.ceil(bound))


@dataclass(frozen=True)
class StochasticRunResult:
    """Parallel stochastic and deterministic trajectories with per-step
    KS distances between them."""

    q_tilde_trace: list[PriorGrid]
    deterministic_trace: list[PriorGrid]
    ks_trace: np.ndarray


def stochastic_iterate(
    p0: PriorGrid,
    family: ParametricFamily,
    n: int,
    stream: UniformStream,
    *,
    constraint: ConstraintSpec | None = None,
    clamp: float = BOUNDARY_CLAMP,
    draw_fn=None,
) -> StochasticRunResult:
    """Alternate common-stream draws with the clamped update for ``n`` steps.

    The same stream is reused at every draw.  The deterministic comparison
    trajectory applies the identical (clamped) update map without the
    draws.  ``draw_fn`` overrides the draw operator, e.g. with the identity
    to recover the deterministic trajectory exactly.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    draw = draw_common if draw_fn is None else draw_fn
    matrix = family.matrix(p0.grid)
    grid = p0.grid

    def step(prior: PriorGrid) -> PriorGrid:
        w = _clamp_weights(prior.weights, clamp)
        return PriorGrid(grid, _step_weights(w, matrix, grid, constraint))

    q_tilde = draw(p0, stream)
    p_det = p0
    q_trace = [q_tilde]
    p_trace = [p_det]
    ks = [ks_distance(q_tilde, p_det)]
    for _ in range(n):
        q_tilde = draw(step(q_tilde), stream)
        p_det = step(p_det)
        q_trace.append(q_tilde)
        p_trace.append(p_det)
        ks.append(ks_distance(q_tilde, p_det))
    return StochasticRunResult(q_trace, p_trace, np.array(ks))


@dataclass(frozen=True)
class CoverageResult:
    """Outcome of a replicated coverage check of the sample-size bound."""

    beta_hat: float
    beta_used: float
    gamma: float
    n_samples: int
    n_steps: int
    epsilon: float
    alpha: float
    replications: int
    coverage: float
    ks_values: np.ndarray

    def summary(self) -> dict:
        """The fields the verification report file carries."""
        return {
            "beta_hat": self.beta_hat,
            "gamma_n": self.gamma,
            "N_used": self.n_samples,
            "epsilon": self.epsilon,
            "alpha": self.alpha,
            "replications": self.replications,
            "coverage": self.coverage,
        }


def coverage_study(
    family: ParametricFamily,
    grid,
    n: int,
    epsilon: float,
    alpha: float,
    replications: int,
    seed: int,
    *,
    lipschitz_trials: int = 200,
    beta_inflation: float = 1.1,
    beta_override: float | None = None,
    max_samples: int = 10_000_000,
    clamp: float = BOUNDARY_CLAMP,
) -> CoverageResult:
    """Estimate how often the stochastic iterate lands within ``epsilon``
    of the deterministic one when the stream size follows the bound.

    The Lipschitz factor is estimated empirically (inflated by
    ``beta_inflation`` as a safety margin) unless ``beta_override`` pins
    it.  Each replication uses a fresh stream, reproducible from ``seed``;
    within a replication the stream is fixed.  The coverage should be at
    least ``1 - alpha``.  Raises :class:`InfeasibleSampleBoundError` when
    the bound exceeds ``max_samples``.
    """
    grid = np.asarray(grid, dtype=float)
    if replications < 1:
        raise ValueError("replications must be >= 1")
    if replications < 100:
        warnings.warn(
            f"{replications} replications give a coarse coverage estimate; "
            "use at least 100",
            DiagnosticWarning,
            stacklevel=2,
        )
    if beta_override is not None:
        beta_hat = float(beta_override)
        beta_used = beta_hat
    else:
        beta_hat = estimate_lipschitz(family, grid, lipschitz_trials, seed, clamp=clamp)
        beta_used = beta_hat * beta_inflation
    gamma = growth_factor(beta_used, n)
    n_samples = sample_bound(epsilon, alpha, beta_used, n)
    if n_samples > max_samples:
        raise InfeasibleSampleBoundError(n_samples, max_samples)

    p0 = PriorGrid.uniform(grid)
    children = np.random.SeedSequence(seed).spawn(replications)
    ks_values = np.empty(replications)
    for r in range(replications):
        stream = UniformStream(
            np.random.default_rng(children[r]).random(n_samples),
            int(children[r].generate_state(1)[0]),
        )
        result = stochastic_iterate(p0, family, n, stream, clamp=clamp)
        ks_values[r] = result.ks_trace[-1]
    coverage = float((ks_values < epsilon).mean())
    return CoverageResult(
        beta_hat=beta_hat,
        beta_used=beta_used,
        gamma=gamma,
        n_samples=n_samples,
        n_steps=n,
        epsilon=epsilon,
        alpha=alpha,
        replications=replications,
        coverage=coverage,
        ks_values=ks_values,
    )
