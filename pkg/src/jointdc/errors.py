"""Exception types raised by the package.

The CLI maps ``ConvergenceError`` to exit code 2 and every other
``JointModelError`` to exit code 1.
"""


class JointModelError(Exception):
    """Base class for all package errors."""


class DomainError(JointModelError, ValueError):
    """An argument lies outside the domain of a function."""


class ConfigurationError(JointModelError):
    """A model or run configuration is invalid or references unknown columns."""


class DataError(JointModelError):
    """Input data cannot support the requested computation."""


class SchemaError(DataError):
    """A CSV file lacks a required column or holds an unparseable cell."""


class ConvergenceError(JointModelError):
    """No optimizer start converged.

    Parameters
    ----------
    message : str
    traces : list
        One ``StartTrace`` per attempted start.
    """

    def __init__(self, message, traces=None):
        super().__init__(message)
        self.traces = list(traces or [])
