"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Operand shapes are inconsistent with each other."""


class NonSquareError(ValueError):
    """A square matrix was required."""


class InvalidLabelError(ValueError):
    """Class label is outside the valid range for the classifier."""


class NotWellPosedError(RuntimeError):
    """The network's weighted l-inf matrix measure is >= 1, so the
    fixed-point iteration carries no convergence guarantee."""


class MaxIterExceededError(RuntimeError):
    """Fixed-point iteration did not reach the tolerance.

    Carries the iteration count and the last step norm so callers can
    report partial progress (IBP runs hit this routinely; it signals a
    genuinely ill-posed iteration, not an implementation fault).
    """

    def __init__(self, message: str, iterations: int, final_residual: float):
        super().__init__(message)
        self.iterations = iterations
        self.final_residual = final_residual


class ParseError(ValueError):
    """File is not valid JSON / JSON-lines for the documented schema."""


class ShapeError(ValueError):
    """A model or dataset field has the wrong length or shape."""
