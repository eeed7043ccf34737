"""Exception hierarchy shared by the library and the command-line tool."""


class IonProbeError(Exception):
    """Base class for all errors raised by :mod:`ionprobe`."""


class DomainError(IonProbeError, ValueError):
    """An argument lies outside the domain of an operation."""


class UnitError(IonProbeError, ValueError):
    """Two unit tags are unknown or dimensionally incompatible."""


class ConfigError(IonProbeError, ValueError):
    """A configuration or an experiment setup is inconsistent."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ConvergenceError(IonProbeError, RuntimeError):
    """An iterative solver ran out of iterations.

    ``residual`` holds the final residual norm so callers can judge how
    close the solver came.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConditioningError(IonProbeError, RuntimeError):
    """The Jacobian of a fit problem is singular at the starting point."""
