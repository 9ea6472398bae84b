"""Exception hierarchy for the boundary-condition toolkit."""
from typing import Optional, Tuple


class QWallsError(Exception):
    """Base class for every error raised by this package"""


class GridMismatchError(QWallsError):
    """Two grid states live on different intervals or sample counts"""


class NumericDomainError(QWallsError):
    """A sample, trace or coefficient is not finite"""


class DomainError(QWallsError, ValueError):
    """A parameter lies outside its admissible range"""


class ConstraintViolationError(QWallsError):
    """A boundary vector does not belong to the form domain"""


class SupportMismatchError(QWallsError):
    """A frame map was applied to a state on the wrong interval"""


class ConvergenceError(QWallsError):
    """Root refinement or bracketing failed"""

    def __init__(self, message: str, bracket: Optional[Tuple[float, float]] = None):
        if bracket is not None:
            message = f"{message} (bracket [{bracket[0]:.12g}, {bracket[1]:.12g}])"
        super().__init__(message)
        self.bracket = bracket


class StepError(QWallsError):
    """The Crank-Nicolson linear system could not be solved"""

    def __init__(self, message: str, condition: Optional[float] = None):
        if condition is not None:
            message = f"{message} (condition estimate {condition:.3e})"
        super().__init__(message)
        self.condition = condition
