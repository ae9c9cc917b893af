"""Exception hierarchy shared across the package."""


class ItrError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ItrError):
    """Invalid user-supplied data or configuration (CLI exit code 2)."""


class NumericError(ItrError):
    """A numeric computation could not be completed (CLI exit code 3)."""
