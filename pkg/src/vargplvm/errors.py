"""Exception types shared across the package."""


class ArgumentError(ValueError):
    """Bad shapes, unknown names or out-of-range options."""


class StateError(ValueError):
    """An object is in a state that violates its invariants."""


class CapabilityError(NotImplementedError):
    """The requested computation is not available for this configuration."""


class NumericalError(ArithmeticError):
    """A factorisation failed or a non-finite value was produced.

    ``snapshot`` optionally carries diagnostic state (parameter vector,
    bound trace) captured at the time of failure.
    """

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot


class DataFileError(OSError):
    """Unreadable or malformed input file."""
