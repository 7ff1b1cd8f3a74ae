from .errors import (
    AdmissibilityError,
    ConcLabError,
    ConfigError,
    ConvergenceError,
    DegeneratePivotError,
    DomainError,
    HypothesisWarning,
    InsufficientDataError,
    NormModeWarning,
    RangeError,
    RejectionError,
    ShapeError,
    SingularMatrixError,
    TrialAlignmentError,
    WindowError,
)
from .profile import ConcentrationProfile, ProductSpec, Regime
from .generators import DiagonalModel, LipschitzTransform, MatrixModel, SampleEnsemble, VectorModel
from .observables import Observation
from .estimation import EmpiricalTail, TailFit
from .rmt import ResolventSpec, RobustRegressionSpec

__all__ = [
    "ConcLabError",
    "RangeError",
    "DomainError",
    "ShapeError",
    "TrialAlignmentError",
    "InsufficientDataError",
    "WindowError",
    "AdmissibilityError",
    "SingularMatrixError",
    "DegeneratePivotError",
    "ConvergenceError",
    "RejectionError",
    "ConfigError",
    "HypothesisWarning",
    "NormModeWarning",
    "Regime",
    "ConcentrationProfile",
    "ProductSpec",
    "VectorModel",
    "LipschitzTransform",
    "MatrixModel",
    "DiagonalModel",
    "SampleEnsemble",
    "Observation",
    "EmpiricalTail",
    "TailFit",
    "ResolventSpec",
    "RobustRegressionSpec",
]
