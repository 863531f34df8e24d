"""Activation dumps, per-class mean activation vectors, and distances.

The JSON-lines dump format is the file contract between this package and
whatever produced the activations:

    {"id": str, "split": "train"|"val"|"test"|"generated",
     "true_label": int, "predicted_label": int|null, "av": [float, ...]}

true_label is the classifier class index for train/val records (-1 marks a
ground-truth unknown, e.g. held-out generated samples used for threshold
selection). Test records from unknown classes carry their protocol class
id, which may exceed the activation dimension; test labels are never used
for fitting.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyClass, ParseError

SPLITS = ("train", "val", "test", "generated")


class DistanceMetric(str, Enum):
    EUCLIDEAN = "euclidean"
    COSINE = "cosine"
    EUCOS = "eucos"  # euclidean / dimension + cosine


@dataclass(frozen=True, eq=False)
class ActivationRecord:
    id: str
    split: str
    true_label: int
    av: np.ndarray
    predicted_label: int | None = None


@dataclass(frozen=True, eq=False)
class ClassStats:
    class_id: int
    mav: np.ndarray
    distances: list[float]
    n_samples: int


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _parse_record(obj, lineno: int) -> ActivationRecord:
    if not isinstance(obj, dict):
        raise ParseError(f"line {lineno}: expected a JSON object")
    rid = obj.get("id")
    if not isinstance(rid, str) or not rid:
        raise ParseError(f"line {lineno}: 'id' must be a non-empty string")
    split = obj.get("split")
    if split not in SPLITS:
        raise ParseError(f"line {lineno}: 'split' must be one of {SPLITS}, got {split!r}")
    label = obj.get("true_label")
    if not _is_int(label) or label < -1:
        raise ParseError(f"line {lineno}: 'true_label' must be an integer >= -1")
    pred = obj.get("predicted_label")
    if pred is not None and not _is_int(pred):
        raise ParseError(f"line {lineno}: 'predicted_label' must be an integer or null")
    av = obj.get("av")
    if not isinstance(av, list) or not av:
        raise ParseError(f"line {lineno}: 'av' must be a non-empty array")
    for v in av:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ParseError(f"line {lineno}: 'av' must contain finite numbers")
    return ActivationRecord(
        id=rid,
        split=split,
        true_label=label,
        av=np.asarray(av, dtype=np.float64),
        predicted_label=pred,
    )


def load_dump(path: str | Path) -> list[ActivationRecord]:
    """Load a JSON-lines activation dump, validating the uniform vector length."""
    records: list[ActivationRecord] = []
    dim: int | None = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {lineno}: invalid JSON ({exc.msg})") from None
            rec = _parse_record(obj, lineno)
            if dim is None:
                dim = rec.av.size
            elif rec.av.size != dim:
                raise DimensionMismatch(
                    f"line {lineno}: av length {rec.av.size} != {dim}"
                )
            records.append(rec)
    return records


def write_dump(records: Iterable[ActivationRecord], path: str | Path) -> None:
    """Write records back out in the dump format."""
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "id": rec.id,
                "split": rec.split,
                "true_label": int(rec.true_label),
                "predicted_label": None if rec.predicted_label is None else int(rec.predicted_label),
                "av": [float(v) for v in rec.av],
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def distance(av: Sequence[float], mav: Sequence[float], metric: DistanceMetric) -> float:
    """Distance between an activation vector and a MAV under the given metric."""
    a = np.asarray(av, dtype=np.float64)
    b = np.asarray(mav, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"vector lengths {a.shape} vs {b.shape}")
    if np.array_equal(a, b):
        return 0.0
    if metric is DistanceMetric.EUCLIDEAN:
        return float(np.linalg.norm(a - b))
    if metric is DistanceMetric.COSINE:
        return _cosine(a, b)
    if metric is DistanceMetric.EUCOS:
        return float(np.linalg.norm(a - b)) / a.size + _cosine(a, b)
    raise ValueError(f"unknown metric {metric!r}")


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return max(0.0, 1.0 - float(np.dot(a, b)) / (na * nb))


def compute_class_stats(
    records: Iterable[ActivationRecord],
    class_id: int,
    metric: DistanceMetric = DistanceMetric.EUCLIDEAN,
    correct_only: bool = True,
) -> ClassStats:
    """Mean activation vector and MAV distances for one class.

    Contributing records are train-split records of the class; with
    correct_only the prediction must also match the label.
    """
    avs = [
        r.av
        for r in records
        if r.split == "train"
        and r.true_label == class_id
        and (not correct_only or r.predicted_label == r.true_label)
    ]
    if not avs:
        raise EmptyClass(f"class {class_id}: no contributing train records")
    mat = np.stack(avs)
    mav = mat.mean(axis=0)
    dists = [distance(av, mav, metric) for av in mat]
    return ClassStats(class_id=class_id, mav=mav, distances=dists, n_samples=len(avs))
