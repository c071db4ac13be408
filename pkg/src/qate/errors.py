"""Exception types shared by all engines.

Each maps onto a distinct failure class so that callers (and the CLI exit
codes) can react without string matching.
"""


class QateError(Exception):
    """Base class for library errors."""


class DomainError(QateError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(QateError, ValueError):
    """Inconsistent or unsupported model/experiment parameters."""


class SingularityError(QateError, ArithmeticError):
    """A closed form is evaluated at a point where it degenerates."""


class ResourceError(QateError, RuntimeError):
    """A request exceeds a configured size cap."""
