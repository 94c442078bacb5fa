"""Exception hierarchy shared across the toolkit.

The CLI maps these onto exit codes: configuration and input problems
exit with 2, numerical failures with 3, I/O errors with 4.
"""


class LevitofError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(LevitofError):
    """Invalid configuration value, missing key, or unusable parameter."""


class DataError(LevitofError):
    """Malformed or degenerate input data (bad rows, constant columns)."""


class NumericsError(LevitofError):
    """A numerical routine failed to produce a usable result."""


class SubQuantumWidthError(NumericsError):
    """Measured width lies below the quantum-limited value."""


class FitError(NumericsError):
    """A fit did not converge or has no physical solution."""


class RootBracketError(NumericsError):
    """Root finding found no sign change inside the search bracket."""
