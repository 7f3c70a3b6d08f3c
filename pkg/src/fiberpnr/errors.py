"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class FiberPNRError(Exception):
    """Base class for all package errors."""


class ValidationError(FiberPNRError, ValueError):
    """An input is outside its documented domain."""


class ConfigurationError(ValidationError):
    """A detector description does not close into a binary splitting tree."""


class NumericalError(FiberPNRError, ArithmeticError):
    """A numerical procedure failed (singular system, non-convergence)."""


class InversionError(NumericalError):
    """The conditional matrix cannot be inverted reliably."""
