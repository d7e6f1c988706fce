"""Sampling version of the capacity iteration.

Instead of carrying a weight vector over a parameter grid, each iteration
carries a sample of parameter values.  The iterate has an exponential form
whose log-density ratio between two parameter values needs only the
per-outcome running sum of log estimated marginals, so the whole
inter-iteration state is that accumulator (one real per outcome) plus the
current sample.  Each iteration:

1. estimates the output marginal by averaging model rows over the current
   sample (with a small smoothing floor so no outcome gets exactly zero),
2. folds its log into the running accumulator,
3. draws the next sample with a Metropolis-Hastings chain whose target
   log-density ratio is computed from the accumulator,
4. records the average row divergence against the estimated marginal,
   which converges to the minimax risk.

Sample sizes follow a quadratic schedule ``N_s = N0 + c * s**2`` so the
accumulated stochastic variance of the log-marginal sums stays bounded;
the per-iteration variance diagnostic tracks exactly that accumulation.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import xlogy

from .errors import DiagnosticWarning, NonfiniteAccumulatorError
from .family import ConstraintSpec, ParametricFamily, cond_entropy
from .infomath import PriorGrid, ks_samples_vs_grid
from .ba_grid import _step_weights

__all__ = [
    "LogMarginalAccumulator",
    "SampleSet",
    "McmcConfig",
    "IterationRecord",
    "RunTrace",
    "log_ratio",
    "mh_chain",
    "update_marginal",
    "accumulate_log_marginal",
    "minimax_estimate",
    "run_mcmc_ba",
    "variance_diagnostic",
]

# Rows are evaluated for sample batches of this size to bound peak memory.
_CHUNK = 4096


@dataclass(frozen=True)
class LogMarginalAccumulator:
    """Running per-outcome sum of log estimated marginals.

    ``t`` is the index of the last folded-in marginal; a fresh accumulator
    has ``t == -1`` and all-zero values.  This vector plus the current
    sample is the algorithm's entire inter-iteration state.
    """

    values: np.ndarray
    t: int = -1

    @classmethod
    def zero(cls, n_outcomes: int) -> "LogMarginalAccumulator":
        return cls(np.zeros(n_outcomes), -1)


@dataclass(frozen=True)
class SampleSet:
    """Parameter sample from one iteration plus chain diagnostics."""

    thetas: np.ndarray
    iteration: int
    acceptance_rate: float
    chain_seed: int
    final_state: float


@dataclass(frozen=True)
class McmcConfig:
    """Settings for a full sampling run.

    ``n0`` and ``growth`` define the schedule ``N_s = n0 + growth * s**2``
    for the sample drawn at iteration index ``s``.  ``mh_steps`` is the
    minimum chain length per iteration; chains extend automatically when
    the schedule asks for more retained samples than the length allows.
    ``proposal_halfwidth`` defaults to a tenth of the parameter range.
    """

    family: ParametricFamily
    iterations: int
    n0: int = 500
    growth: int = 20
    mh_steps: int = 10_000
    proposal_halfwidth: float | None = None
    burn_in_fraction: float = 0.2
    thinning: int | None = None
    seed: int = 0
    smoothing_floor: float = 1e-12
    constraint: ConstraintSpec | None = None
    common_randomness: bool = False

    def __post_init__(self):
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.n0 < 1:
            raise ValueError("n0 must be >= 1")
        if self.growth < 0:
            raise ValueError("growth must be >= 0")
        if self.mh_steps < 2:
            raise ValueError("mh_steps must be >= 2")
        if not 0.0 <= self.burn_in_fraction < 1.0:
            raise ValueError("burn_in_fraction must lie in [0, 1)")
        if self.thinning is not None and self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if self.smoothing_floor < 0:
            raise ValueError("smoothing_floor must be >= 0")
        if self.proposal_halfwidth is not None and self.proposal_halfwidth <= 0:
            raise ValueError("proposal_halfwidth must be positive")

    def schedule(self, s: int) -> int:
        return self.n0 + self.growth * s * s

    def halfwidth(self) -> float:
        if self.proposal_halfwidth is not None:
            return self.proposal_halfwidth
        return self.family.theta_range / 10.0


@dataclass(frozen=True)
class IterationRecord:
    """Everything recorded for one completed iteration."""

    iteration: int
    n_samples: int
    acceptance_rate: float
    minimax_estimate: float
    tau_sq: float
    marginal_variance: np.ndarray = field(repr=False)
    n_for_qhat: int = 0
    ks_to_oracle: float | None = None
    wallclock_ms: float = 0.0


@dataclass(frozen=True)
class RunTrace:
    """Per-iteration records plus the final sample and accumulator."""

    records: list[IterationRecord]
    final: SampleSet
    accumulator: LogMarginalAccumulator


# ---------------------------------------------------------------------------
# Exponential-form density ratios
# ---------------------------------------------------------------------------


def log_ratio(
    theta: float,
    phi: float,
    t: int,
    acc: LogMarginalAccumulator,
    family: ParametricFamily,
    constraint: ConstraintSpec | None = None,
) -> float:
    """Log density ratio of the ``t+1``-st iterate between two parameters.

    Antisymmetric in ``(theta, phi)``; requires the accumulator to hold
    exactly the first ``t+1`` log marginals (``acc.t == t``).
    """
    if acc.t != t:
        raise ValueError(f"accumulator holds t={acc.t}, expected t={t}")
    family.require_in_domain(theta)
    family.require_in_domain(phi)
    value = (t + 1) * (cond_entropy(family, phi) - cond_entropy(family, theta))
    value += float((family.row(phi) - family.row(theta)) @ acc.values)
    if constraint is not None and constraint.multiplier > 0:
        value += (t + 1) * constraint.multiplier * (
            float(constraint.expense(phi)) - float(constraint.expense(theta))
        )
    return value


def _log_potential_fn(
    t: int,
    acc_values: np.ndarray,
    family: ParametricFamily,
    constraint: ConstraintSpec | None,
):
    """phi-free log potential whose differences equal :func:`log_ratio`."""
    tt = t + 1
    row = family.row
    mult = constraint.multiplier if constraint is not None else 0.0
    expense = constraint.expense if constraint is not None else None

    def potential(theta: float) -> float:
        q = row(theta)
        value = tt * float(xlogy(q, q).sum()) - float(q @ acc_values)
        if mult > 0:
            value -= tt * mult * float(expense(theta))
        return value

    return potential


# ---------------------------------------------------------------------------
# Metropolis-Hastings sampling
# ---------------------------------------------------------------------------


def _reflect(x: float, lo: float, hi: float) -> float:
    while x < lo or x > hi:
        if x < lo:
            x = 2.0 * lo - x
        if x > hi:
            x = 2.0 * hi - x
    return x


def mh_chain(
    acc: LogMarginalAccumulator,
    t: int,
    family: ParametricFamily,
    n_samples: int,
    steps: int,
    proposal_halfwidth: float,
    seed: int,
    *,
    burn_in_fraction: float = 0.2,
    thinning: int | None = None,
    start: float | None = None,
    constraint: ConstraintSpec | None = None,
    shared_uniforms: tuple[np.ndarray, np.ndarray] | None = None,
) -> SampleSet:
    """Sample the ``t+1``-st iterate with a reflected uniform random walk.

    The proposal is uniform on ``[x - h, x + h]`` reflected at the domain
    boundaries (symmetric, so the acceptance ratio is the bare density
    ratio).  The first ``burn_in_fraction`` of the chain is discarded and
    the remainder thinned to ``n_samples`` values.  Deterministic given
    ``seed``; with ``shared_uniforms`` the chain consumes the supplied
    unit-uniform streams instead of drawing fresh ones.
    """
    if acc.t != t:
        raise ValueError(f"accumulator holds t={acc.t}, expected t={t}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if proposal_halfwidth <= 0:
        raise ValueError("proposal_halfwidth must be positive")
    burn = int(burn_in_fraction * steps)
    usable = steps - burn
    stride = thinning if thinning is not None else usable // n_samples
    if stride < 1 or burn + stride * n_samples > steps:
        raise ValueError(
            f"chain of {steps} steps cannot yield {n_samples} samples after "
            f"burn-in {burn} at stride {max(stride, 1)}"
        )

    if shared_uniforms is None:
        rng = np.random.default_rng(seed)
        unit_prop = rng.random(steps)
        unit_acc = rng.random(steps)
    else:
        unit_prop, unit_acc = shared_uniforms
        if unit_prop.size < steps or unit_acc.size < steps:
            raise ValueError("shared uniform streams shorter than the chain")
        unit_prop = unit_prop[:steps]
        unit_acc = unit_acc[:steps]

    lo, hi = family.theta_lo, family.theta_hi
    offsets = (2.0 * unit_prop - 1.0) * proposal_halfwidth
    with np.errstate(divide="ignore"):
        log_acc = np.log(unit_acc)

    potential = _log_potential_fn(t, acc.values, family, constraint)
    x = 0.5 * (lo + hi) if start is None else float(start)
    family.require_in_domain(x)
    pot_x = potential(x)

    chain = np.empty(steps)
    accepted = 0
    for i in range(steps):
        y = _reflect(x + offsets[i], lo, hi)
        pot_y = potential(y)
        if log_acc[i] < pot_y - pot_x:
            x = y
            pot_x = pot_y
            accepted += 1
        chain[i] = x

    rate = accepted / steps
    if rate < 0.01 or rate > 0.99:
        warnings.warn(
            f"acceptance rate {rate:.4f} at iteration t={t} "
            f"(halfwidth {proposal_halfwidth:g})",
            DiagnosticWarning,
            stacklevel=2,
        )
    keep = burn + stride * np.arange(1, n_samples + 1) - 1
    return SampleSet(
        thetas=chain[keep],
        iteration=t + 1,
        acceptance_rate=rate,
        chain_seed=seed,
        final_state=float(chain[-1]),
    )


def _required_steps(config: McmcConfig, n_samples: int) -> int:
    """Smallest chain length (at least ``mh_steps``) that can supply
    ``n_samples`` retained values after burn-in and thinning."""
    stride = config.thinning if config.thinning is not None else 1
    need = stride * n_samples
    if config.burn_in_fraction > 0:
        need = math.ceil(need / (1.0 - config.burn_in_fraction))
    while int(config.burn_in_fraction * need) + stride * n_samples > need:
        need += 1
    return max(config.mh_steps, need)


# ---------------------------------------------------------------------------
# Marginal estimation and risk
# ---------------------------------------------------------------------------


def _sample_row_stats(
    family: ParametricFamily, thetas: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Mean and (population) variance of model rows over a sample."""
    n_y = family.n_outcomes
    total = np.zeros(n_y)
    total_sq = np.zeros(n_y)
    n = thetas.size
    for lo in range(0, n, _CHUNK):
        block = family.rows(thetas[lo : lo + _CHUNK])
        total += block.sum(axis=0)
        total_sq += np.square(block).sum(axis=0)
    mean = total / n
    var = np.clip(total_sq / n - np.square(mean), 0.0, None)
    return mean, var


def update_marginal(
    samples: SampleSet, family: ParametricFamily, floor: float
) -> np.ndarray:
    """Empirical mixture of model rows over the sample, floored and
    renormalized so every outcome keeps strictly positive mass when
    ``floor > 0``."""
    mean, _ = _sample_row_stats(family, samples.thetas)
    return _smooth(mean, floor)


def _smooth(probs: np.ndarray, floor: float) -> np.ndarray:
    if floor <= 0:
        return probs
    out = np.maximum(probs, floor)
    return out / out.sum()


def accumulate_log_marginal(
    acc: LogMarginalAccumulator, q_hat: np.ndarray
) -> LogMarginalAccumulator:
    """Fold the log of an estimated marginal into the accumulator."""
    q_hat = np.asarray(q_hat, dtype=float)
    if q_hat.shape != acc.values.shape:
        raise ValueError("marginal and accumulator sizes differ")
    if (q_hat <= 0).any():
        raise NonfiniteAccumulatorError(
            "estimated marginal has zero mass on some outcome; the running "
            "log sum would be non-finite (use a positive smoothing floor)"
        )
    return LogMarginalAccumulator(acc.values + np.log(q_hat), acc.t + 1)


def minimax_estimate(
    samples: SampleSet, q_hat: np.ndarray, family: ParametricFamily
) -> float:
    """Sample-averaged divergence of model rows from the estimated marginal.

    Converges to the minimax risk (equivalently the channel capacity) as
    the iteration converges.
    """
    q_hat = np.asarray(q_hat, dtype=float)
    log_q = np.log(q_hat)
    thetas = samples.thetas
    total = 0.0
    for lo in range(0, thetas.size, _CHUNK):
        block = family.rows(thetas[lo : lo + _CHUNK])
        total += float((xlogy(block, block).sum(axis=1) - block @ log_q).sum())
    return total / thetas.size


# ---------------------------------------------------------------------------
# The full iteration
# ---------------------------------------------------------------------------


def run_mcmc_ba(
    config: McmcConfig,
    oracle_grid=None,
    progress=None,
    sample_hook=None,
) -> RunTrace:
    """Run the sampling iteration for ``config.iterations`` rounds.

    The initial sample is drawn uniformly from the parameter domain; each
    subsequent chain warm-starts at the previous chain's final state.  With
    ``oracle_grid`` the deterministic grid iteration runs alongside on that
    grid and each record carries the KS distance between the new sample and
    the matching deterministic iterate.  ``progress`` is called with each
    completed :class:`IterationRecord`; ``sample_hook`` is called with
    every :class:`SampleSet` (initial included) as it is produced, so
    callers can stream samples out without the run retaining them.

    Deterministic given the config seed.  A failure mid-run re-raises with
    the partial trace attached as ``exc.partial_trace``.
    """
    family = config.family
    n_y = family.n_outcomes
    halfwidth = config.halfwidth()
    seed_seq = np.random.SeedSequence(config.seed)
    children = seed_seq.spawn(config.iterations + 2)

    def child_seed(i: int) -> int:
        return int(children[i].generate_state(1)[0])

    init_rng = np.random.default_rng(children[0])
    initial = SampleSet(
        thetas=init_rng.uniform(family.theta_lo, family.theta_hi, config.schedule(0)),
        iteration=0,
        acceptance_rate=float("nan"),
        chain_seed=child_seed(0),
        final_state=0.0,
    )
    initial = replace(initial, final_state=float(initial.thetas[-1]))
    if sample_hook is not None:
        sample_hook(initial)

    shared: tuple[np.ndarray, np.ndarray] | None = None
    if config.common_randomness:
        max_steps = max(
            (_required_steps(config, config.schedule(t + 1)) for t in range(config.iterations)),
            default=config.mh_steps,
        )
        shared_rng = np.random.default_rng(children[config.iterations + 1])
        shared = (shared_rng.random(max_steps), shared_rng.random(max_steps))

    oracle_weights = None
    oracle_matrix = None
    if oracle_grid is not None:
        oracle_grid = np.asarray(oracle_grid, dtype=float)
        oracle_weights = np.full(oracle_grid.size, 1.0 / oracle_grid.size)
        oracle_matrix = family.matrix(oracle_grid)

    acc = LogMarginalAccumulator.zero(n_y)
    current = initial
    records: list[IterationRecord] = []
    tau_sq = 0.0

    for t in range(config.iterations):
        tic = time.perf_counter()
        try:
            q_hat, q_var = _sample_row_stats(family, current.thetas)
            q_hat = _smooth(q_hat, config.smoothing_floor)
            acc = accumulate_log_marginal(acc, q_hat)
            n_next = config.schedule(t + 1)
            steps = _required_steps(config, n_next)
            nxt = mh_chain(
                acc,
                t,
                family,
                n_next,
                steps,
                halfwidth,
                child_seed(t + 1),
                burn_in_fraction=config.burn_in_fraction,
                thinning=config.thinning,
                start=current.final_state,
                constraint=config.constraint,
                shared_uniforms=shared,
            )
            risk = minimax_estimate(nxt, q_hat, family)
            tau_sq += float(q_var.sum()) / current.thetas.size
            ks = None
            if oracle_weights is not None:
                oracle_weights = _step_weights(
                    oracle_weights, oracle_matrix, oracle_grid, config.constraint
                )
                ks = ks_samples_vs_grid(
                    nxt.thetas, PriorGrid(oracle_grid, oracle_weights)
                )
        except Exception as exc:
            exc.partial_trace = RunTrace(records, current, acc)
            raise
        record = IterationRecord(
            iteration=t,
            n_samples=n_next,
            acceptance_rate=nxt.acceptance_rate,
            minimax_estimate=risk,
            tau_sq=tau_sq,
            marginal_variance=q_var,
            n_for_qhat=current.thetas.size,
            ks_to_oracle=ks,
            wallclock_ms=(time.perf_counter() - tic) * 1e3,
        )
        records.append(record)
        if progress is not None:
            progress(record)
        if sample_hook is not None:
            sample_hook(nxt)
        current = nxt

    return RunTrace(records=records, final=current, accumulator=acc)


def variance_diagnostic(trace: RunTrace, family: ParametricFamily) -> np.ndarray:
    """Running accumulated-variance sequence recomputed from the per-
    iteration sample variances of the model rows.

    Entry ``t`` is the sum over iterations ``s <= t`` of the aggregate row
    variance divided by the sample size that estimated that iteration's
    marginal; nondecreasing by construction, and bounded whenever the
    reciprocal sample sizes are summable.
    """
    if not trace.records:
        raise ValueError("trace has no completed iterations")
    contributions = []
    for rec in trace.records:
        if rec.marginal_variance.size != family.n_outcomes:
            raise ValueError("trace was produced by a different outcome space")
        contributions.append(float(rec.marginal_variance.sum()) / rec.n_for_qhat)
    return np.cumsum(contributions)
