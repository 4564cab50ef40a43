"""Exception hierarchy used across the package.

The CLI maps :class:`ValidationError` / :class:`DomainError` to exit
code 2 (bad inputs) and :class:`NumericalError` / :class:`ConvergenceError`
to exit code 3 (a computation that started but could not finish).
"""


class PrefboundsError(Exception):
    """Base class for all package-specific errors."""

    exit_code = 1


class ValidationError(PrefboundsError):
    """Raised when user-supplied parameters or data fail validation."""

    exit_code = 2


class DomainError(PrefboundsError):
    """Raised when inputs are structurally valid but outside the usable domain."""

    exit_code = 2


class NumericalError(PrefboundsError):
    """Raised when a numeric routine produces non-finite or unusable output."""

    exit_code = 3


class ConvergenceError(PrefboundsError):
    """Raised when an iterative routine exhausts its budget without converging."""

    exit_code = 3
