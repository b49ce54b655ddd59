"""Exception taxonomy shared across the toolkit.

Every error raised by library code derives from Pwr2LabError so callers can
catch the whole family at a process boundary (the CLI maps them to exit 2/3).
"""


class Pwr2LabError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(Pwr2LabError):
    """Bad inputs: wrong sizes, ranges, or incompatible objects."""


class NumericalError(Pwr2LabError):
    """A computation ran but failed to produce a usable result."""


class InvalidSize(ValidationError):
    pass


class SizeMismatch(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class DisconnectedGraph(NumericalError):
    pass


class InvalidK(ValidationError):
    pass


class InvalidDistance(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class InvalidMomentum(ValidationError):
    pass


class ManifoldNotExited(NumericalError):
    pass


class ConvergenceFailure(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class NoCrossing(NumericalError):
    pass


class AmbiguousCrossing(NumericalError):
    def __init__(self, message, roots=None):
        super().__init__(message)
        self.roots = list(roots) if roots is not None else []


class WindowTooNarrow(ValidationError):
    pass


class InsufficientPairs(ValidationError):
    pass


class FitFailure(NumericalError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class InvalidGap(ValidationError):
    pass


class NoBoundaryFound(NumericalError):
    pass


class InvalidDisplacement(ValidationError):
    pass


class DegenerateGeometry(ValidationError):
    pass
