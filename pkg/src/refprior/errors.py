"""Exception and warning types shared across the package."""


class RefPriorError(Exception):
    """Base class for all package errors."""


class DomainError(RefPriorError, ValueError):
    """A parameter value lies outside (or on a forbidden boundary of) the
    family's parameter domain."""


class UnsupportedReductionError(RefPriorError, ValueError):
    """The family has no registered sufficient statistic for repeated trials."""


class NumericError(RefPriorError, ArithmeticError):
    """A numerical invariant was violated (e.g. negative Fisher information)."""


class RenormalizationError(RefPriorError, ArithmeticError):
    """A Blahut-Arimoto step hit a zero marginal on an outcome that a
    positive-weight grid point supports; the input prior is degenerate."""


class NonfiniteAccumulatorError(RefPriorError, ArithmeticError):
    """The running log-marginal accumulator would become non-finite
    (an outcome received zero estimated mass with no smoothing floor)."""


class GridMismatchError(RefPriorError, ValueError):
    """Two grid-indexed distributions do not share the same grid."""


class InfeasibleSampleBoundError(RefPriorError, RuntimeError):
    """The sample-size bound exceeds the configured budget.

    Carries ``required``, the number of shared uniforms the bound demands.
    """

    def __init__(self, required: int, budget: int):
        self.required = required
        self.budget = budget
        super().__init__(
            f"sample-size bound requires N >= {required} shared uniforms, "
            f"exceeding the budget of {budget}"
        )


class ConfigError(RefPriorError, ValueError):
    """A run configuration file is malformed or inconsistent."""


class DiagnosticWarning(UserWarning):
    """Non-fatal diagnostic attached to a numerical result
    (poor acceptance rate, unstable finite difference, ...)."""
