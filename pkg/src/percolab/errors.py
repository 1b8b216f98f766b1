"""Exception types shared across the package."""


class PercolabError(Exception):
    """Base class for package-specific errors."""


class MarginViolation(PercolabError):
    """An analyzed structure reached the window rim.

    Raised instead of silently truncating; callers running statistics catch
    this, exclude the sample, and count it in a diagnostics channel.
    """


class InvariantViolation(PercolabError):
    """A structural identity that must hold per configuration failed.

    Bug-level: any occurrence is a defect, never an expected outcome.
    """


class InsufficientData(PercolabError):
    """Too few applicable samples to produce the requested estimate."""


class BudgetExceeded(PercolabError):
    """An exhaustive enumeration exceeded its state budget."""
