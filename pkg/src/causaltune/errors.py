"""Exception hierarchy. Each class carries the CLI exit code for its failure class."""


class CausalTuneError(Exception):
    exit_code = 1


class ConfigError(CausalTuneError, ValueError):
    """Bad parameters, bad configuration, inconsistent seeds."""

    exit_code = 2


class ValidationError(ConfigError):
    """Input data violates a type invariant (shape, finiteness, layout)."""


class DimensionError(ValidationError):
    pass


class NumericError(CausalTuneError, ArithmeticError):
    """Non-finite intermediates or a failed numerical tolerance."""

    exit_code = 3


class CtenIOError(CausalTuneError, OSError):
    exit_code = 4


class UsageError(CausalTuneError, RuntimeError):
    """API misuse, e.g. differentiating a graph that was never recorded."""
