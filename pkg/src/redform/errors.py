"""Exception hierarchy shared across the package."""


class RedformError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(RedformError):
    """Malformed or inconsistent input (instance files, reduced forms, flags)."""


class CapExceeded(RedformError):
    """An enumeration or iteration budget was exhausted.

    Raised loudly instead of silently approximating; ground-truth oracles
    must never degrade.
    """


class SolverFault(RedformError):
    """Internal inconsistency: unsound oracle, repeated cut, failed postcondition."""
