"""Channel capacity, minimax risk, and finite-sample reference priors.

Deterministic grid Blahut-Arimoto iteration, its sampling (MCMC) variant
with an O(|outcomes|) running state, and a common-random-numbers harness
that checks the sample-size requirement for the stochastic iteration to
track the deterministic one.
"""

from .errors import (
    ConfigError,
    DiagnosticWarning,
    DomainError,
    GridMismatchError,
    InfeasibleSampleBoundError,
    NonfiniteAccumulatorError,
    NumericError,
    RefPriorError,
    RenormalizationError,
    UnsupportedReductionError,
)
from .family import (
    ConstraintSpec,
    ParametricFamily,
    bernoulli_family,
    cond_entropy,
    cond_prob,
    fisher_information,
    jeffreys_weights,
    load_matrix_family,
    matrix_family,
    negative_binomial_family,
    normal_family,
    poisson_family,
    sufficient_reduce,
)
from .infomath import (
    PriorGrid,
    entropy,
    kl_divergence,
    ks_distance,
    ks_samples_vs_grid,
    marginal,
    mutual_information,
)
from .ba_grid import (
    BaSolveResult,
    ba_solve,
    ba_step,
    capacity_bounds,
    clamped_ba_step,
    estimate_lipschitz,
)
from .ba_mcmc import (
    IterationRecord,
    LogMarginalAccumulator,
    McmcConfig,
    RunTrace,
    SampleSet,
    accumulate_log_marginal,
    log_ratio,
    mh_chain,
    minimax_estimate,
    run_mcmc_ba,
    update_marginal,
    variance_diagnostic,
)
from .common_random import (
    CoverageResult,
    StochasticRunResult,
    UniformStream,
    coverage_study,
    draw_common,
    growth_factor,
    sample_bound,
    stochastic_iterate,
)

__version__ = "0.1.0"
