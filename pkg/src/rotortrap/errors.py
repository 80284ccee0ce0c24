"""Exception and warning types shared across the package."""


class RotortrapError(Exception):
    """Base class for all package errors."""


class ConfigError(RotortrapError):
    """Malformed configuration; carries the offending line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConstraintViolation(RotortrapError, ValueError):
    """A physical configuration breaks one of its invariants."""


class NumericalFailure(RotortrapError):
    """Family of errors raised when a numerical procedure cannot complete."""


class QuadratureFailure(NumericalFailure):
    pass


class StepFailure(NumericalFailure):
    pass


class WindowOutOfRange(NumericalFailure, ValueError):
    pass


class BoundaryNotFound(NumericalFailure):
    pass


class DegenerateSpectrum(NumericalFailure):
    pass


class InsufficientData(NumericalFailure, ValueError):
    pass


class PulseTooLong(RotortrapError, ValueError):
    pass


class FitError(RotortrapError):
    """Family of errors raised by the orientation reconstruction."""


class NonConvergence(FitError):
    pass


class DegenerateGeometry(FitError, ValueError):
    pass


class ClampWarning(RuntimeWarning):
    """A cosine left [-1, 1] by more than rounding before being clamped."""


class TooFewLines(RuntimeWarning):
    """A strobe-map column had fewer resolvable dips than requested."""


class AmbiguousAssignment(RuntimeWarning):
    """Two resonance tracks cross within their joint uncertainty."""


class ValidityWarning(RuntimeWarning):
    """A closed-form approximation is used outside its validity range."""
