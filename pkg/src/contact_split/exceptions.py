"""Exception types shared across the package."""


class ContactSplitError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(ContactSplitError, ValueError):
    pass


class SingularMatrix(ContactSplitError, ArithmeticError):
    """Raised when a stiffness factorization hits a (near) zero or negative pivot."""

    def __init__(self, message, pivot_index=None, pivot=None):
        super().__init__(message)
        self.pivot_index = pivot_index
        self.pivot = pivot


class NoConvergence(ContactSplitError, RuntimeError):
    pass


class MismatchedInterfaces(ContactSplitError, ValueError):
    pass


class NoProjection(ContactSplitError, ValueError):
    pass


class CycleDetected(ContactSplitError, RuntimeError):
    pass


class MaxOuter(ContactSplitError, RuntimeError):
    pass


class NoKKTPoint(ContactSplitError, RuntimeError):
    pass


class ZeroReference(ContactSplitError, ValueError):
    pass


class InsufficientTrace(ContactSplitError, ValueError):
    pass


class ConfigError(ContactSplitError, ValueError):
    """Malformed or inconsistent configuration file."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
