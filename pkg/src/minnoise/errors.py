"""Exception and warning types shared across the package.

Each error class carries the process exit code the CLI maps it to.
"""


class MinNoiseError(Exception):
    exit_code = 1


class ConfigError(MinNoiseError, ValueError):
    exit_code = 2


class NumericDomainError(MinNoiseError, ArithmeticError):
    exit_code = 3


class ConvergenceError(NumericDomainError):
    """Iterative solve stopped without meeting its tolerance."""

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class NonphysicalRootError(NumericDomainError):
    def __init__(self, message, root=None):
        super().__init__(message)
        self.root = root


class NoOscillationError(MinNoiseError):
    exit_code = 4


class NegativeConcentrationWarning(RuntimeWarning):
    pass
