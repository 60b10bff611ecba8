"""Exception hierarchy shared by all modules.

The CLI maps each family onto a process exit code.
"""


class ConvPredError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ConvPredError, ValueError):
    """Invalid parameters or configuration files."""


class DataError(ConvPredError, ValueError):
    """Malformed, empty or inconsistent signals and files."""


class NumericalError(ConvPredError, ArithmeticError):
    """A linear system could not be solved in a meaningful way."""
