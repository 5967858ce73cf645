"""Exception types shared across the package."""


class LdsmError(Exception):
    """Base class for all package errors."""


class RejectedInputError(LdsmError, ValueError):
    """Input violates a documented precondition."""


class InsufficientDataError(RejectedInputError):
    """Too few time steps for the requested estimate."""

    def __init__(self, message: str, required: int):
        super().__init__(message)
        self.required = required


class SingularMatrixError(LdsmError):
    """A Cholesky pivot fell below tolerance."""

    def __init__(self, message: str, pivot_index: int):
        super().__init__(message)
        self.pivot_index = pivot_index


class DegenerateVarianceError(LdsmError):
    """Estimated noise variance is too small to divide by."""


class ConvergenceError(LdsmError):
    """An iterative solver did not converge within its iteration budget."""

    def __init__(self, message: str, lam: float | None = None, gap: float | None = None):
        super().__init__(message)
        self.lam = lam
        self.gap = gap


class OracleScaleError(RejectedInputError):
    """Requested dense oracle matrix exceeds the size guard."""


class CapExceededError(LdsmError):
    """A trajectory-length search hit its cap without success."""
