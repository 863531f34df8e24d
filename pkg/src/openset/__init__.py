"""EVT-based open-set classification calibration and evaluation."""

from .activations import (
    ActivationRecord,
    ClassStats,
    DistanceMetric,
    compute_class_stats,
    distance,
    load_dump,
    write_dump,
)
from .calibrator import (
    UNKNOWN,
    CalibratedOutput,
    CalibrationConfig,
    FittedCalibrator,
    Mode,
    WeightFormula,
    decide,
    fit,
    recalibrate,
    softmax,
)
from .errors import (
    ConfigError,
    DegenerateTail,
    DimensionMismatch,
    EmptyClass,
    EmptyInput,
    EmptySubset,
    InsufficientData,
    InvalidCounts,
    MissingPrediction,
    OpenSetError,
    ParseError,
)
from .evaluation import (
    EvaluationReport,
    FoldDumps,
    FoldScore,
    Method,
    ProtocolSpec,
    SweepGrid,
    f_measure,
    known_accuracy,
    openness,
    sweep,
    unknown_accuracy,
)
from .evt import WeibullModel, fit_weibull_tail, weibull_cdf
from .mixture import (
    CandidateSelection,
    MixtureVector,
    mixture_argmax,
    sample_mixture,
    sample_mixture_batch,
    select_unknown_candidates,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationRecord",
    "CalibratedOutput",
    "CalibrationConfig",
    "CandidateSelection",
    "ClassStats",
    "ConfigError",
    "DegenerateTail",
    "DimensionMismatch",
    "DistanceMetric",
    "EmptyClass",
    "EmptyInput",
    "EmptySubset",
    "EvaluationReport",
    "FittedCalibrator",
    "FoldDumps",
    "FoldScore",
    "InsufficientData",
    "InvalidCounts",
    "Method",
    "MissingPrediction",
    "MixtureVector",
    "Mode",
    "OpenSetError",
    "ParseError",
    "ProtocolSpec",
    "SweepGrid",
    "UNKNOWN",
    "WeibullModel",
    "WeightFormula",
    "compute_class_stats",
    "decide",
    "distance",
    "f_measure",
    "fit",
    "fit_weibull_tail",
    "known_accuracy",
    "load_dump",
    "mixture_argmax",
    "openness",
    "recalibrate",
    "sample_mixture",
    "sample_mixture_batch",
    "select_unknown_candidates",
    "softmax",
    "sweep",
    "unknown_accuracy",
    "weibull_cdf",
    "write_dump",
]
