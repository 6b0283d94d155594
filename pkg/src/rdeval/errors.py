"""Exception hierarchy shared across the package.

Each class carries the process exit code the command-line tool maps it to.
"""


class RdevalError(Exception):
    """Base class for errors raised by this package."""

    exit_code = 1


class ConfigError(RdevalError):
    """Bad flags, bad data files, or inconsistent run configuration."""

    exit_code = 2


class ModelError(RdevalError):
    """Model manifest failed to load or validate."""

    exit_code = 3


class NumericError(RdevalError):
    """Numerical failure (non-finite quantity, non-convergence)."""

    exit_code = 4

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
