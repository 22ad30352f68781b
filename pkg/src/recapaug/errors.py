"""Exception types shared across the package."""


class RecapError(Exception):
    """Base class for all package errors."""


class ShapeError(RecapError, ValueError):
    """Image or kernel dimensions are unusable or inconsistent."""


class RangeError(RecapError, ValueError):
    """A numeric argument lies outside its documented range."""


class ModeError(RecapError, ValueError):
    """Operation applied to an unsupported color mode."""


class FormatError(RecapError, ValueError):
    """Malformed binary or serialized input."""


class UnsupportedProfileError(FormatError):
    """ICC container is valid but lacks the required matrix/TRC tags."""


class ValidationError(RecapError, ValueError):
    """Parsed or constructed data violates a structural invariant."""


class ConfigError(RecapError, RuntimeError):
    """Missing or inconsistent runtime configuration (banks, budgets)."""


class NumericError(RecapError, ArithmeticError):
    """A computation produced non-finite values."""


class UndefinedLossError(RecapError, ValueError):
    """A loss term is undefined for the given batch composition."""
