"""Error and warning types shared by every engine."""

from typing import Optional


class ConcLabError(Exception):
    """Base class for engine errors"""
    pass


class RangeError(ConcLabError):
    """An argument lies outside its admissible range"""
    pass


class DomainError(ConcLabError):
    """An argument is outside the domain of the operation (unknown kind, 1 - δD <= 0, ...)"""
    pass


class ShapeError(ConcLabError):
    """Array shapes are not conformable"""
    pass


class TrialAlignmentError(ConcLabError):
    """Ensembles combined trial-by-trial do not share N or master seed"""
    pass


class InsufficientDataError(ConcLabError):
    pass


class WindowError(ConcLabError):
    """Too few tail-grid points inside the fit window"""
    pass


class AdmissibilityError(ConcLabError):
    """The spectral condition κ²κ_D ≤ 1 − ε (or a contraction margin) is violated"""

    def __init__(self, message: str, measured: Optional[float] = None):
        super().__init__(message)
        self.measured = measured


class SingularMatrixError(ConcLabError):
    def __init__(self, message: str, smallest_singular_value: float):
        super().__init__(message)
        self.smallest_singular_value = smallest_singular_value


class DegeneratePivotError(ConcLabError):
    def __init__(self, message: str, pivot: float):
        super().__init__(message)
        self.pivot = pivot


class ConvergenceError(ConcLabError):
    """An iteration did not reach its tolerance within max_iter"""

    def __init__(self, message: str, residuals: Optional[list] = None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class RejectionError(ConcLabError):
    """Too many Monte Carlo draws were rejected as inadmissible"""

    def __init__(self, message: str, rejected: int, total: int):
        super().__init__(message)
        self.rejected = rejected
        self.total = total


class ConfigError(ConcLabError):
    """Invalid experiment configuration; `key` names the offending entry"""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


class HypothesisWarning(UserWarning):
    """A hypothesis of a bound is not met; the bound is still reported"""
    pass


class NormModeWarning(UserWarning):
    """A test matrix exceeds the unit ball of the declared norm mode"""
    pass
