"""Exception types shared across the package.

Each error carries a short machine-readable ``category`` used by the CLI to
pick an exit code and emit a structured error line.
"""


class TimeperceptError(Exception):
    """Base class for all package errors."""

    category = "runtime"


class ParameterError(TimeperceptError, ValueError):
    """A parameter is outside its mathematical domain (e.g. beta <= 0)."""

    category = "parameter"


class StateError(TimeperceptError, ValueError):
    """An operation conflicts with the current state (e.g. duplicate deploy)."""

    category = "state"


class OrderingError(TimeperceptError, ValueError):
    """A time argument precedes an event it must not precede."""

    category = "ordering"


class UsageError(TimeperceptError, RuntimeError):
    """API misuse, such as stepping a terminal environment state."""

    category = "usage"


class CoverageError(TimeperceptError, KeyError):
    """A history refers to an interval the action model does not cover."""

    category = "coverage"


class NumericalDegeneracyError(TimeperceptError, RuntimeError):
    """A matrix decomposition failed on degenerate input."""

    category = "degeneracy"


class OptimizerDivergenceError(TimeperceptError, RuntimeError):
    """The likelihood became non-finite during hyperparameter search."""

    category = "divergence"

    def __init__(self, message, iterates=None):
        super().__init__(message)
        self.iterates = list(iterates) if iterates is not None else []


class EstimationFailureError(TimeperceptError, RuntimeError):
    """All candidate likelihoods were non-finite."""

    category = "estimation"


class ConfigError(TimeperceptError, ValueError):
    """An experiment configuration failed validation."""

    category = "config"
