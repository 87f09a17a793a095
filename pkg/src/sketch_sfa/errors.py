"""Exception types shared across the package."""


class SketchSfaError(Exception):
    """Base class for all package errors."""


class InvalidInput(SketchSfaError):
    pass


class DegenerateDistribution(SketchSfaError):
    """Sampling requested from an all-zero vector or matrix."""


class EmptySpectrum(SketchSfaError):
    """Singular value threshold sits above the whole spectrum."""


class BudgetExceeded(SketchSfaError):
    """A sketch or expansion size overflows the configured budget."""


class RejectionStall(SketchSfaError):
    """Rejection sampling exceeded its trial cap; the overhead ratio is far
    larger than its running estimate."""


class RankDeficient(SketchSfaError):
    """Data matrix is numerically rank deficient.

    Carries the estimated smallest singular value.
    """

    def __init__(self, message: str, theta: float = 0.0):
        super().__init__(message)
        self.theta = theta
