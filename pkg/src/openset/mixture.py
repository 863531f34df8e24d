"""Class-mixture conditioning vectors and synthetic-sample selection.

A mixture vector blends the known one-hot class codes in the generator's
conditioning space: the first N-1 components are drawn from
Normal(1/N, sigma) and the last absorbs the remainder so the components
always sum to exactly 1. Generated images whose classifier prediction
disagrees with the mixture argmax are kept as unknown-class candidates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .activations import ActivationRecord
from .errors import InvalidCounts, MissingPrediction


@dataclass(frozen=True, eq=False)
class MixtureVector:
    m: np.ndarray
    seed: int


@dataclass(eq=False)
class CandidateSelection:
    selected_ids: list[str]
    total_generated: int
    rejection_reasons: dict[str, str]


def sample_mixture(n_classes: int, rng_seed: int, sigma: float = 0.2) -> MixtureVector:
    """One mixture vector; deterministic for a given seed."""
    if n_classes < 1:
        raise InvalidCounts(f"n_classes must be >= 1, got {n_classes}")
    if sigma <= 0.0:
        raise InvalidCounts(f"sigma must be > 0, got {sigma}")
    rng = np.random.default_rng(rng_seed)
    head = rng.normal(1.0 / n_classes, sigma, size=n_classes - 1)
    m = np.append(head, 1.0 - head.sum())
    return MixtureVector(m=m, seed=rng_seed)


def sample_mixture_batch(
    n_classes: int, count: int, rng_seed: int, sigma: float = 0.2
) -> list[MixtureVector]:
    """A batch of mixture vectors from one seeded generator stream."""
    if n_classes < 1:
        raise InvalidCounts(f"n_classes must be >= 1, got {n_classes}")
    if sigma <= 0.0:
        raise InvalidCounts(f"sigma must be > 0, got {sigma}")
    if count < 0:
        raise InvalidCounts(f"count must be >= 0, got {count}")
    rng = np.random.default_rng(rng_seed)
    heads = rng.normal(1.0 / n_classes, sigma, size=(count, n_classes - 1))
    tails = 1.0 - heads.sum(axis=1, keepdims=True)
    mat = np.hstack([heads, tails])
    return [MixtureVector(m=mat[i], seed=rng_seed) for i in range(count)]


def mixture_argmax(mv: MixtureVector) -> int:
    """Index of the dominant class; ties go to the lowest index."""
    return int(np.argmax(mv.m))


def select_unknown_candidates(generated: Iterable[ActivationRecord]) -> CandidateSelection:
    """Keep generated records the classifier misclassified relative to the mixture argmax."""
    selected: list[str] = []
    reasons: dict[str, str] = {}
    total = 0
    for rec in generated:
        total += 1
        if rec.predicted_label is None:
            raise MissingPrediction(f"record {rec.id} lacks predicted_label")
        if rec.predicted_label != rec.true_label:
            selected.append(rec.id)
        else:
            reasons[rec.id] = "net_agrees"
    return CandidateSelection(
        selected_ids=selected, total_generated=total, rejection_reasons=reasons
    )


def write_mixture_batch(vectors: Sequence[MixtureVector], path: str | Path) -> None:
    """JSON-lines batch: {"id": str, "seed": int, "m": [...], "argmax": int}."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, mv in enumerate(vectors):
            obj = {
                "id": f"m{mv.seed}-{i:06d}",
                "seed": int(mv.seed),
                "m": [float(v) for v in mv.m],
                "argmax": mixture_argmax(mv),
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def load_mixture_batch(path: str | Path) -> list[dict]:
    """Parse a mixture batch file back into dicts."""
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out
