"""Open-set evaluation protocol: openness, F-measure, accuracies, sweeps.

A sweep evaluates the Cartesian product of methods x alphas x tail sizes
x openness levels x thresholds over per-fold activation dumps. Openness is
varied by growing the prefix of the protocol's unknown test classes that
is admitted into the test set. Threshold selection ("val-optimal" policy)
only ever sees validation-split records.
"""

from __future__ import annotations

import concurrent.futures
import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .activations import ActivationRecord, DistanceMetric
from .calibrator import (
    UNKNOWN,
    CalibrationConfig,
    Mode,
    WeightFormula,
    decide,
    fit,
    recalibrate,
    softmax,
)
from .errors import (
    DimensionMismatch,
    EmptyInput,
    EmptySubset,
    InvalidCounts,
    OpenSetError,
)


class Method(str, Enum):
    SOFTMAX = "softmax"
    OPENMAX = "openmax"
    G_SOFTMAX = "g-softmax"
    G_OPENMAX = "g-openmax"


G_METHODS = (Method.G_SOFTMAX, Method.G_OPENMAX)
CALIBRATED_METHODS = (Method.OPENMAX, Method.G_OPENMAX)

TARGET_METRICS = ("f_measure", "known_accuracy", "unknown_accuracy")

CSV_COLUMNS = (
    "mode",
    "alpha",
    "epsilon",
    "tail_size",
    "openness",
    "f_measure",
    "known_acc",
    "unknown_acc",
    "fold",
)


@dataclass(frozen=True)
class ProtocolSpec:
    known_classes: tuple[int, ...]
    unknown_test_classes: tuple[int, ...]
    n_folds: int = 1
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)

    def __post_init__(self):
        object.__setattr__(self, "known_classes", tuple(self.known_classes))
        object.__setattr__(self, "unknown_test_classes", tuple(self.unknown_test_classes))
        object.__setattr__(self, "split_fractions", tuple(self.split_fractions))
        if not self.known_classes:
            raise InvalidCounts("known_classes must be non-empty")
        if set(self.known_classes) & set(self.unknown_test_classes):
            raise InvalidCounts("known and unknown class sets overlap")
        if self.n_folds < 1:
            raise InvalidCounts(f"n_folds must be >= 1, got {self.n_folds}")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise InvalidCounts(f"split fractions must sum to 1, got {self.split_fractions}")


@dataclass(eq=False)
class FoldDumps:
    net: list[ActivationRecord]
    netg: list[ActivationRecord] | None = None


@dataclass(frozen=True)
class SweepGrid:
    methods: tuple[Method, ...]
    alphas: tuple[int, ...]
    tail_sizes: tuple[int, ...]
    epsilons: tuple[float, ...]
    unknown_counts: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(Method(m) for m in self.methods))
        object.__setattr__(self, "alphas", tuple(int(a) for a in self.alphas))
        object.__setattr__(self, "tail_sizes", tuple(int(t) for t in self.tail_sizes))
        object.__setattr__(self, "epsilons", tuple(float(e) for e in self.epsilons))
        if self.unknown_counts is not None:
            object.__setattr__(
                self, "unknown_counts", tuple(int(u) for u in self.unknown_counts)
            )
        if not self.methods:
            raise InvalidCounts("grid field 'modes' must be non-empty")
        for a in self.alphas:
            if a < 0:
                raise InvalidCounts(f"grid field 'alphas' must be >= 0, got {a}")
        for t in self.tail_sizes:
            if t < 2:
                raise InvalidCounts(f"grid field 'tail_sizes' must be >= 2, got {t}")
        for e in self.epsilons:
            if not 0.0 <= e <= 1.0:
                raise InvalidCounts(f"grid field 'epsilons' must be in [0, 1], got {e}")


@dataclass
class FoldScore:
    fold: int
    epsilon: float | None
    f_measure: float | None
    known_accuracy: float | None
    unknown_accuracy: float | None
    error: str | None = None


@dataclass
class EvaluationReport:
    method: Method
    alpha: int
    tail_size: int
    epsilon: float | None  # None under the val-optimal policy (per-fold values in folds)
    n_unknown_classes: int
    openness: float
    folds: list[FoldScore] = field(default_factory=list)
    f_measure: float | None = None
    known_accuracy: float | None = None
    unknown_accuracy: float | None = None
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "mode": self.method.value,
            "alpha": self.alpha,
            "tail_size": self.tail_size,
            "epsilon": self.epsilon,
            "n_unknown_classes": self.n_unknown_classes,
            "openness": self.openness,
            "f_measure": self.f_measure,
            "known_accuracy": self.known_accuracy,
            "unknown_accuracy": self.unknown_accuracy,
            "error": self.error,
            "folds": [
                {
                    "fold": fs.fold,
                    "epsilon": fs.epsilon,
                    "f_measure": fs.f_measure,
                    "known_accuracy": fs.known_accuracy,
                    "unknown_accuracy": fs.unknown_accuracy,
                    "error": fs.error,
                }
                for fs in self.folds
            ],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "EvaluationReport":
        return cls(
            method=Method(obj["mode"]),
            alpha=int(obj["alpha"]),
            tail_size=int(obj["tail_size"]),
            epsilon=obj["epsilon"],
            n_unknown_classes=int(obj["n_unknown_classes"]),
            openness=float(obj["openness"]),
            folds=[
                FoldScore(
                    fold=int(f["fold"]),
                    epsilon=f["epsilon"],
                    f_measure=f["f_measure"],
                    known_accuracy=f["known_accuracy"],
                    unknown_accuracy=f["unknown_accuracy"],
                    error=f.get("error"),
                )
                for f in obj["folds"]
            ],
            f_measure=obj["f_measure"],
            known_accuracy=obj["known_accuracy"],
            unknown_accuracy=obj["unknown_accuracy"],
            error=obj.get("error"),
        )


def openness(n_train: int, n_test: int, n_r: int) -> float:
    """1 - sqrt(2 * n_train / (n_r + n_test)) over class counts."""
    for name, v in (("n_train", n_train), ("n_test", n_test), ("n_r", n_r)):
        if v <= 0:
            raise InvalidCounts(f"{name} must be positive, got {v}")
    return 1.0 - math.sqrt(2.0 * n_train / (n_r + n_test))


def _confusion_counts(predictions: Sequence, truths: Sequence) -> tuple[int, int, int]:
    labels = set(predictions) | set(truths)
    tp = fp = fn = 0
    for lab in labels:
        for p, t in zip(predictions, truths):
            if p == lab and t == lab:
                tp += 1
            elif p == lab and t != lab:
                fp += 1
            elif p != lab and t == lab:
                fn += 1
    return tp, fp, fn


def f_measure(predictions: Sequence, truths: Sequence, average: str = "micro") -> float:
    """F1 with Unknown treated as one additional label.

    Micro-averaging aggregates confusion counts over all labels; for
    single-label predictions this equals exact-match accuracy. Macro
    averages per-class F1 over the known labels present in the truths.
    """
    if len(predictions) != len(truths):
        raise DimensionMismatch(
            f"predictions ({len(predictions)}) and truths ({len(truths)}) differ in length"
        )
    if not len(truths):
        raise EmptyInput("no samples")
    if average == "micro":
        tp, fp, fn = _confusion_counts(predictions, truths)
        if tp == 0:
            return 0.0
        precision = tp / (tp + fp)
        recall = tp / (tp + fn)
        return 2.0 * precision * recall / (precision + recall)
    if average == "macro":
        labels = sorted({t for t in truths if t != UNKNOWN})
        if not labels:
            raise EmptySubset("no known-class truths for macro averaging")
        scores = []
        for lab in labels:
            tp = sum(1 for p, t in zip(predictions, truths) if p == lab and t == lab)
            fp = sum(1 for p, t in zip(predictions, truths) if p == lab and t != lab)
            fn = sum(1 for p, t in zip(predictions, truths) if p != lab and t == lab)
            if tp == 0:
                scores.append(0.0)
            else:
                pr = tp / (tp + fp)
                rc = tp / (tp + fn)
                scores.append(2.0 * pr * rc / (pr + rc))
        return float(np.mean(scores))
    raise InvalidCounts(f"average must be 'micro' or 'macro', got {average!r}")


def known_accuracy(predictions: Sequence, truths: Sequence) -> float:
    """Fraction of known-truth samples predicted with the exact class."""
    if len(predictions) != len(truths):
        raise DimensionMismatch("predictions and truths differ in length")
    pairs = [(p, t) for p, t in zip(predictions, truths) if t != UNKNOWN]
    if not pairs:
        raise EmptySubset("no known-class truths")
    return sum(1 for p, t in pairs if p == t) / len(pairs)


def unknown_accuracy(predictions: Sequence, truths: Sequence) -> float:
    """Fraction of unknown-truth samples predicted Unknown."""
    if len(predictions) != len(truths):
        raise DimensionMismatch("predictions and truths differ in length")
    pairs = [(p, t) for p, t in zip(predictions, truths) if t == UNKNOWN]
    if not pairs:
        raise EmptySubset("no unknown-class truths")
    return sum(1 for p, t in pairs if p == UNKNOWN) / len(pairs)


def _truth(label: int, known: frozenset, active_unknown: frozenset):
    """Map a dump label to a truth value, or None when excluded from the cell."""
    if label == UNKNOWN:
        return UNKNOWN
    if label in known:
        return label
    if label in active_unknown:
        return UNKNOWN
    return None


def _predict(probs: np.ndarray, eps: float, method: Method, known: Sequence[int]):
    if method is Method.SOFTMAX:
        d = decide(probs, eps, None)
    elif method is Method.G_SOFTMAX:
        d = decide(probs, eps, Mode.GOPENMAX)
    elif method is Method.OPENMAX:
        d = decide(probs, eps, Mode.OPENMAX)
    else:
        d = decide(probs, eps, Mode.GOPENMAX)
    if d == UNKNOWN:
        return UNKNOWN
    return known[d]


def _score_fold(
    dumps: FoldDumps,
    protocol: ProtocolSpec,
    method: Method,
    alpha: int,
    tail_size: int,
    metric: DistanceMetric,
    weight_formula: WeightFormula,
    correct_only: bool,
):
    """Probability vectors for all val/test records of a fold under one method."""
    records = dumps.netg if method in G_METHODS else dumps.net
    if records is None:
        raise EmptyInput(f"{method.value} requires a netg dump")
    if not records:
        raise EmptyInput("empty dump")
    n_known = len(protocol.known_classes)
    dim = records[0].av.size
    expected = n_known + 1 if method in G_METHODS else n_known
    if dim != expected:
        raise DimensionMismatch(
            f"{method.value} expects {expected}-dim activations for "
            f"{n_known} known classes, dump has {dim}"
        )
    calib = None
    if method in CALIBRATED_METHODS:
        mode = Mode.GOPENMAX if method is Method.G_OPENMAX else Mode.OPENMAX
        cfg = CalibrationConfig(
            alpha=alpha,
            epsilon=0.0,
            tail_size=tail_size,
            metric=metric,
            weight_formula=weight_formula,
            mode=mode,
            correct_only=correct_only,
        )
        calib = fit(records, cfg)
    val_scored = []
    test_scored = []
    for rec in records:
        if rec.split not in ("val", "test"):
            continue
        if calib is not None:
            probs = recalibrate(rec.av, calib).probabilities
        else:
            probs = softmax(rec.av)
        (val_scored if rec.split == "val" else test_scored).append((rec, probs))
    return val_scored, test_scored


def _cell_metrics(
    scored,
    protocol: ProtocolSpec,
    active_unknown: frozenset,
    method: Method,
    eps: float,
    average: str,
) -> tuple[float, float | None, float | None]:
    known = frozenset(protocol.known_classes)
    preds, truths = [], []
    for rec, probs in scored:
        t = _truth(rec.true_label, known, active_unknown)
        if t is None:
            continue
        preds.append(_predict(probs, eps, method, protocol.known_classes))
        truths.append(t)
    if not truths:
        raise EmptySubset("no records qualify for this cell")
    f = f_measure(preds, truths, average=average)
    try:
        ka = known_accuracy(preds, truths)
    except EmptySubset:
        ka = None
    try:
        ua = unknown_accuracy(preds, truths)
    except EmptySubset:
        ua = None
    return f, ka, ua


def _choose_epsilon(
    val_scored,
    protocol: ProtocolSpec,
    method: Method,
    epsilons: Sequence[float],
    target_metric: str,
    average: str,
) -> float:
    """Threshold maximizing the target metric on validation records only.

    Only -1-labelled records count as unknowns here; unknown test classes
    never appear in the validation split.
    """
    for rec, _ in val_scored:
        if rec.split != "val":
            raise ValueError("epsilon selection must only see val-split records")
    best_eps = None
    best_val = None
    for eps in epsilons:
        try:
            f, ka, ua = _cell_metrics(
                val_scored, protocol, frozenset(), method, eps, average
            )
        except EmptySubset:
            continue
        value = {"f_measure": f, "known_accuracy": ka, "unknown_accuracy": ua}[target_metric]
        if value is None:
            continue
        if best_val is None or value > best_val:
            best_val = value
            best_eps = eps
    if best_eps is None:
        raise EmptySubset(f"target metric {target_metric} undefined on the validation split")
    return best_eps


def _unit_reports(
    fold_dumps: Sequence[FoldDumps],
    protocol: ProtocolSpec,
    method: Method,
    alpha: int,
    tail_size: int,
    unknown_counts: Sequence[int],
    epsilons: Sequence[float],
    epsilon_policy: str,
    target_metric: str,
    average: str,
    metric: DistanceMetric,
    weight_formula: WeightFormula,
    correct_only: bool,
) -> list[EvaluationReport]:
    """All reports for one (method, alpha, tail_size) work unit."""
    per_fold = []
    for dumps in fold_dumps:
        try:
            per_fold.append(
                _score_fold(
                    dumps, protocol, method, alpha, tail_size,
                    metric, weight_formula, correct_only,
                )
            )
        except OpenSetError as exc:
            per_fold.append(exc)

    n_known = len(protocol.known_classes)
    reports = []
    for u in unknown_counts:
        active = frozenset(protocol.unknown_test_classes[:u])
        if u == 0:
            cell_openness = 0.0
        else:
            cell_openness = openness(n_known, n_known + u, n_known)
        eps_grid = list(epsilons) if epsilon_policy == "grid" else [None]
        for grid_eps in eps_grid:
            report = EvaluationReport(
                method=method,
                alpha=alpha,
                tail_size=tail_size,
                epsilon=grid_eps,
                n_unknown_classes=u,
                openness=cell_openness,
            )
            for fold_idx, scored in enumerate(per_fold):
                if isinstance(scored, OpenSetError):
                    report.folds.append(
                        FoldScore(fold_idx, None, None, None, None, error=str(scored))
                    )
                    continue
                val_scored, test_scored = scored
                try:
                    if grid_eps is None:
                        eps = _choose_epsilon(
                            val_scored, protocol, method, epsilons, target_metric, average
                        )
                    else:
                        eps = grid_eps
                    f, ka, ua = _cell_metrics(
                        test_scored, protocol, active, method, eps, average
                    )
                    report.folds.append(FoldScore(fold_idx, eps, f, ka, ua))
                except OpenSetError as exc:
                    report.folds.append(
                        FoldScore(fold_idx, None, None, None, None, error=str(exc))
                    )
            _finalize_report(report)
            reports.append(report)
    return reports


def _finalize_report(report: EvaluationReport) -> None:
    for attr in ("f_measure", "known_accuracy", "unknown_accuracy"):
        values = [getattr(fs, attr) for fs in report.folds if getattr(fs, attr) is not None]
        setattr(report, attr, float(np.mean(values)) if values else None)
    if report.folds and all(fs.error is not None for fs in report.folds):
        report.error = report.folds[0].error


def sweep(
    fold_dumps: Sequence[FoldDumps],
    protocol: ProtocolSpec,
    grid: SweepGrid,
    *,
    epsilon_policy: str = "grid",
    target_metric: str = "f_measure",
    average: str = "micro",
    metric: DistanceMetric = DistanceMetric.EUCLIDEAN,
    weight_formula: WeightFormula = WeightFormula.CDF_DAMPING,
    correct_only: bool = True,
    jobs: int = 1,
) -> list[EvaluationReport]:
    """Evaluate the full grid over all folds; per-cell failures are recorded,
    never raised. Reports come back in deterministic grid order."""
    if len(fold_dumps) != protocol.n_folds:
        raise InvalidCounts(
            f"protocol declares {protocol.n_folds} folds, got {len(fold_dumps)} dumps"
        )
    if epsilon_policy not in ("grid", "val-optimal"):
        raise InvalidCounts(f"epsilon_policy must be 'grid' or 'val-optimal', got {epsilon_policy!r}")
    if target_metric not in TARGET_METRICS:
        raise InvalidCounts(f"target_metric must be one of {TARGET_METRICS}, got {target_metric!r}")
    if not grid.epsilons:
        raise InvalidCounts("grid field 'epsilons' must be non-empty")
    unknown_counts = grid.unknown_counts
    if unknown_counts is None:
        unknown_counts = (len(protocol.unknown_test_classes),)
    for u in unknown_counts:
        if not 0 <= u <= len(protocol.unknown_test_classes):
            raise InvalidCounts(
                f"grid field 'unknown_counts' must be in 0..{len(protocol.unknown_test_classes)}, got {u}"
            )

    units = [
        (method, alpha, tail)
        for method in grid.methods
        for alpha in grid.alphas
        for tail in grid.tail_sizes
    ]
    args = [
        (
            list(fold_dumps), protocol, method, alpha, tail,
            tuple(unknown_counts), grid.epsilons, epsilon_policy,
            target_metric, average, metric, weight_formula, correct_only,
        )
        for (method, alpha, tail) in units
    ]
    if jobs > 1 and len(units) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_unit_reports_star, args))
    else:
        chunks = [_unit_reports_star(a) for a in args]
    return [report for chunk in chunks for report in chunk]


def _unit_reports_star(args) -> list[EvaluationReport]:
    return _unit_reports(*args)


def report_rows(report: EvaluationReport) -> list[dict]:
    """Per-fold CSV rows for one report."""
    rows = []
    for fs in report.folds:
        rows.append(
            {
                "mode": report.method.value,
                "alpha": report.alpha,
                "epsilon": fs.epsilon if fs.epsilon is not None else report.epsilon,
                "tail_size": report.tail_size,
                "openness": report.openness,
                "f_measure": fs.f_measure,
                "known_acc": fs.known_accuracy,
                "unknown_acc": fs.unknown_accuracy,
                "fold": fs.fold,
            }
        )
    return rows


def write_csv(reports: Iterable[EvaluationReport], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(CSV_COLUMNS))
        writer.writeheader()
        for report in reports:
            for row in report_rows(report):
                writer.writerow(row)


def write_reports_json(
    reports: Iterable[EvaluationReport], path: str | Path, settings: dict | None = None
) -> None:
    payload = {
        "settings": settings or {},
        "reports": [r.to_dict() for r in reports],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def load_reports_json(path: str | Path) -> list[EvaluationReport]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return [EvaluationReport.from_dict(obj) for obj in payload["reports"]]


def plot_f_measure_vs_openness(reports: Sequence[EvaluationReport], path: str | Path) -> None:
    """One line per method: mean F-measure against openness."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for method in Method:
        points = sorted(
            (r.openness, r.f_measure)
            for r in reports
            if r.method is method and r.f_measure is not None
        )
        if points:
            xs, ys = zip(*points)
            ax.plot(xs, ys, marker="o", label=method.value)
    ax.set_xlabel("openness")
    ax.set_ylabel("F-measure")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def plot_accuracy_vs_tail(reports: Sequence[EvaluationReport], path: str | Path) -> None:
    """One line per method: mean unknown-class accuracy against tail size."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for method in Method:
        points = sorted(
            (r.tail_size, r.unknown_accuracy)
            for r in reports
            if r.method is method and r.unknown_accuracy is not None
        )
        if points:
            xs, ys = zip(*points)
            ax.plot(xs, ys, marker="o", label=method.value)
    ax.set_xlabel("tail size")
    ax.set_ylabel("unknown-class accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
