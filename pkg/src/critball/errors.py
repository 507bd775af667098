"""Exception types shared across the package."""


class CritballError(Exception):
    """Base class for all package errors."""


class DomainError(CritballError):
    """A parameter or argument is outside the admissible range."""


class FormatError(CritballError):
    """Malformed structured input (tabulated data, config files)."""


class DivergenceError(CritballError):
    """The IVP integration blew up before reaching its target radius."""

    def __init__(self, message, last_radius=None):
        super().__init__(message)
        self.last_radius = last_radius


class AccuracyError(CritballError):
    """A quadrature or extrapolation failed to reach the requested accuracy."""

    def __init__(self, message, partial_value=None):
        super().__init__(message)
        self.partial_value = partial_value


class DiagnosticsError(CritballError):
    """A diagnostic computation cannot run on the given data (e.g. mesh too coarse)."""


class ConsistencyError(CritballError):
    """Two routes that must agree (certificate vs. solver) disagree."""
