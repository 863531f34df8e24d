"""Score recalibration for open-set rejection.

Fits one Weibull model per output class on the tail of MAV distances, then
dampens the top-ranked activations of a query by how extreme its distance
to each of those classes is. In "openmax" mode the damped mass is
aggregated into a pseudo-unknown activation appended before the softmax;
in "g-openmax" mode the last position is an explicitly trained unknown
class and no pseudo-activation is added.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .activations import (
    ActivationRecord,
    DistanceMetric,
    compute_class_stats,
    distance,
)
from .errors import (
    DegenerateTail,
    DimensionMismatch,
    EmptyClass,
    InsufficientData,
    InvalidCounts,
)
from .evt import WeibullModel, fit_weibull_tail, weibull_survival

UNKNOWN = -1  # decision sentinel, matches the -1 truth encoding in dumps


class Mode(str, Enum):
    OPENMAX = "openmax"
    GOPENMAX = "g-openmax"


class WeightFormula(str, Enum):
    # literal transcription of the published recalibration line:
    # w = 1 - ((alpha - c)/alpha) * exp(-(d/scale)^shape)
    AS_WRITTEN = "as-written"
    # CDF variant: damping grows with distance from the MAV,
    # w = 1 - ((alpha - c + 1)/alpha) * cdf(d)
    CDF_DAMPING = "cdf-damping"


@dataclass(frozen=True)
class CalibrationConfig:
    alpha: int
    epsilon: float
    tail_size: int
    metric: DistanceMetric = DistanceMetric.EUCLIDEAN
    weight_formula: WeightFormula = WeightFormula.CDF_DAMPING
    mode: Mode = Mode.OPENMAX
    correct_only: bool = True

    def __post_init__(self):
        if self.alpha < 0:
            raise InvalidCounts(f"alpha must be >= 0, got {self.alpha}")
        if not 0.0 <= self.epsilon <= 1.0:
            raise InvalidCounts(f"epsilon must be in [0, 1], got {self.epsilon}")
        if self.tail_size < 2:
            raise InvalidCounts(f"tail_size must be >= 2, got {self.tail_size}")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "epsilon": self.epsilon,
            "tail_size": self.tail_size,
            "metric": self.metric.value,
            "weight_formula": self.weight_formula.value,
            "mode": self.mode.value,
            "correct_only": self.correct_only,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "CalibrationConfig":
        return cls(
            alpha=int(obj["alpha"]),
            epsilon=float(obj["epsilon"]),
            tail_size=int(obj["tail_size"]),
            metric=DistanceMetric(obj["metric"]),
            weight_formula=WeightFormula(obj["weight_formula"]),
            mode=Mode(obj["mode"]),
            correct_only=bool(obj["correct_only"]),
        )


@dataclass(eq=False)
class FittedCalibrator:
    config: CalibrationConfig
    mavs: np.ndarray  # (n_classes, n_classes) row per class index
    models: list[WeibullModel]

    @property
    def n_classes(self) -> int:
        return len(self.models)

    @property
    def n_known(self) -> int:
        return self.n_classes - 1 if self.config.mode is Mode.GOPENMAX else self.n_classes

    def to_dict(self) -> dict:
        return {
            "mode": self.config.mode.value,
            "config": self.config.to_dict(),
            "classes": [
                {
                    "class_id": i,
                    "mav": [float(v) for v in self.mavs[i]],
                    "weibull": self.models[i].to_dict(),
                }
                for i in range(self.n_classes)
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FittedCalibrator":
        config = CalibrationConfig.from_dict(obj["config"])
        classes = sorted(obj["classes"], key=lambda c: c["class_id"])
        mavs = np.asarray([c["mav"] for c in classes], dtype=np.float64)
        models = [WeibullModel.from_dict(c["weibull"]) for c in classes]
        return cls(config=config, mavs=mavs, models=models)

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str | Path) -> "FittedCalibrator":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(eq=False)
class CalibratedOutput:
    revised_activations: np.ndarray
    probabilities: np.ndarray
    decision: int
    unknown_probability: float


def softmax(z: Sequence[float]) -> np.ndarray:
    a = np.asarray(z, dtype=np.float64)
    a = a - a.max()
    e = np.exp(a)
    return e / e.sum()


def rank_classes(av: Sequence[float]) -> np.ndarray:
    """Class indices by descending activation; ties broken by lowest index."""
    return np.argsort(-np.asarray(av, dtype=np.float64), kind="stable")


def fit(records: Iterable[ActivationRecord], config: CalibrationConfig) -> FittedCalibrator:
    """Fit per-class MAVs and Weibull tail models from train-split records.

    The train split must cover every class index 0..D-1 where D is the
    activation dimension; for g-openmax the last index is the explicitly
    trained unknown class.
    """
    records = list(records)
    train = [r for r in records if r.split == "train" and r.true_label >= 0]
    if not train:
        raise EmptyClass("no train-split records")
    dim = train[0].av.size
    present = {r.true_label for r in train}
    over = sorted(c for c in present if c >= dim)
    if over:
        raise DimensionMismatch(
            f"train label {over[0]} outside 0..{dim - 1} for {dim}-dim activations"
        )
    for c in range(dim):
        if c not in present:
            raise EmptyClass(f"class {c}: no train-split records")
    if config.mode is Mode.GOPENMAX and dim < 2:
        raise InvalidCounts("g-openmax needs at least one known class plus the unknown class")
    if config.alpha > dim:
        raise InvalidCounts(f"alpha {config.alpha} exceeds class count {dim}")

    mavs = np.empty((dim, dim), dtype=np.float64)
    models: list[WeibullModel] = []
    for c in range(dim):
        stats = compute_class_stats(records, c, config.metric, config.correct_only)
        try:
            model = fit_weibull_tail(stats.distances, config.tail_size)
        except DegenerateTail as exc:
            raise DegenerateTail(f"class {c}: {exc}") from None
        except InsufficientData as exc:
            raise InsufficientData(f"class {c}: {exc}") from None
        mavs[c] = stats.mav
        models.append(model)
    return FittedCalibrator(config=config, mavs=mavs, models=models)


def _literal_damping(d: float, model: WeibullModel) -> float:
    """exp(-(d/scale)^shape) without the translation, evaluated stably."""
    if d <= 0.0:
        return 1.0
    log_z = model.shape * (math.log(d) - math.log(model.scale))
    if log_z > 700.0:
        return 0.0
    return math.exp(-math.exp(log_z))


def recalibrate(av: Sequence[float], calib: FittedCalibrator) -> CalibratedOutput:
    """Apply top-alpha damping to an activation vector and form probabilities."""
    a = np.asarray(av, dtype=np.float64)
    n = calib.n_classes
    if a.ndim != 1 or a.size != n:
        raise DimensionMismatch(f"activation length {a.size} != {n} fitted classes")
    cfg = calib.config
    alpha = cfg.alpha
    if alpha > n:
        raise InvalidCounts(f"alpha {alpha} exceeds class count {n}")
    order = rank_classes(a)
    w = np.ones(n, dtype=np.float64)
    for c in range(1, alpha + 1):
        i = int(order[c - 1])
        d = distance(a, calib.mavs[i], cfg.metric)
        if cfg.weight_formula is WeightFormula.AS_WRITTEN:
            w[i] = 1.0 - ((alpha - c) / alpha) * _literal_damping(d, calib.models[i])
        else:
            # algebraically 1 - f*cdf(d); the survival form preserves w > 0
            f = (alpha - c + 1) / alpha
            w[i] = (1.0 - f) + f * weibull_survival(calib.models[i], d)
    revised = a * w
    if cfg.mode is Mode.OPENMAX:
        pseudo = float(np.dot(a, 1.0 - w))
        z = np.append(revised, pseudo)
    else:
        z = revised
    probs = softmax(z)
    return CalibratedOutput(
        revised_activations=revised,
        probabilities=probs,
        decision=decide(probs, cfg.epsilon, cfg.mode),
        unknown_probability=float(probs[-1]),
    )


def decide(probabilities: Sequence[float], epsilon: float, mode: Mode | None) -> int:
    """Class index, or UNKNOWN when below threshold or won by the unknown slot.

    In either calibration mode the last probability is the unknown slot
    (the appended pseudo-activation for openmax, the trained extra class
    for g-openmax). mode=None means a plain softmax vector with no unknown
    slot, where only the threshold rule applies.
    """
    p = np.asarray(probabilities, dtype=np.float64)
    i = int(np.argmax(p))
    if float(p[i]) < epsilon:
        return UNKNOWN
    if mode is not None and i == p.size - 1:
        return UNKNOWN
    return i
