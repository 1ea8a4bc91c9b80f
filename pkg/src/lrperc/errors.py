"""Exception hierarchy shared by every module."""


class LRPercError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class DomainError(LRPercError, ValueError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2


class ConfigError(LRPercError, ValueError):
    """Experiment parameters violate a precondition (padding, caps, unknown keys)."""

    exit_code = 2


class CapacityError(LRPercError):
    """Problem too large for an exact/enumerative routine or for memory."""

    exit_code = 3


class BracketError(LRPercError):
    """No critical-point crossing found inside the supplied bracket."""

    exit_code = 4


class WindowError(LRPercError, ValueError):
    """Fit window is empty, too short, or contains nonpositive values."""

    exit_code = 5


class StepError(LRPercError, ValueError):
    """Finite-difference step does not contain enough distance classes."""

    exit_code = 6


class PoleError(LRPercError, ArithmeticError):
    """A Mobius word sends a point to infinity."""

    exit_code = 7

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"generator {index} hits its pole")
