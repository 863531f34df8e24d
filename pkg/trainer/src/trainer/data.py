"""Datasets and the per-class 60/20/20 split.

Three sources: `mnist` (via torchvision, local files only), `hasy-subset`
(local directory of per-class image folders), and `synthetic` (procedural
28x28 glyph classes, generated deterministically so tests need no
downloads). Images are float32 in [0, 1], shape (N, 1, 28, 28).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DatasetMissing, ValidationError

IMAGE_SIZE = 28
SYNTHETIC_CLASSES = 10
SYNTHETIC_PER_CLASS = 220
_SYNTHETIC_CONTENT_SEED = 123  # dataset content is fixed, independent of run seeds


@dataclass(frozen=True)
class TrainSpec:
    dataset: str
    known_classes: tuple[int, ...]
    unknown_classes: tuple[int, ...] | None = None  # default: the rest of the dataset
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    latent_code_dim: int = 50
    noise_dim: int = 100
    soft_label: float = 0.9
    epochs: int = 20
    gan_epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    group_size: int = 20  # classes per generator
    split_fractions: tuple[float, float, float] = (0.6, 0.2, 0.2)
    data_root: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "known_classes", tuple(self.known_classes))
        if self.unknown_classes is not None:
            object.__setattr__(self, "unknown_classes", tuple(self.unknown_classes))
        if not self.known_classes:
            raise ValidationError("known_classes must be non-empty")
        if not 0.5 < self.soft_label <= 1.0:
            raise ValidationError(f"soft_label must be in (0.5, 1], got {self.soft_label}")
        if abs(sum(self.split_fractions) - 1.0) > 1e-9:
            raise ValidationError(f"split fractions must sum to 1, got {self.split_fractions}")


@dataclass
class Dataset:
    name: str
    images: np.ndarray  # (N, 1, 28, 28) float32 in [0, 1]
    labels: np.ndarray  # (N,) int64
    ids: list[str] = field(default_factory=list)


def _glyph_template(c: int) -> np.ndarray:
    img = np.zeros((IMAGE_SIZE, IMAGE_SIZE), dtype=np.float32)
    yy, xx = np.mgrid[0:IMAGE_SIZE, 0:IMAGE_SIZE]
    center = (IMAGE_SIZE - 1) / 2.0
    r = np.sqrt((yy - center) ** 2 + (xx - center) ** 2)
    if c == 0:
        img[(r >= 7) & (r <= 10)] = 1.0
    elif c == 1:
        img[:, 12:16] = 1.0
    elif c == 2:
        img[12:16, :] = 1.0
    elif c == 3:
        img[:, 12:16] = 1.0
        img[12:16, :] = 1.0
    elif c == 4:
        img[np.abs(yy - xx) <= 2] = 1.0
    elif c == 5:
        img[np.abs(yy + xx - (IMAGE_SIZE - 1)) <= 2] = 1.0
    elif c == 6:
        img[np.abs(yy - xx) <= 2] = 1.0
        img[np.abs(yy + xx - (IMAGE_SIZE - 1)) <= 2] = 1.0
    elif c == 7:
        img[4:13, 6:22] = 1.0
    elif c == 8:
        img[16:25, 6:22] = 1.0
    elif c == 9:
        img[3:11, 3:11] = 1.0
        img[3:11, 17:25] = 1.0
        img[17:25, 3:11] = 1.0
        img[17:25, 17:25] = 1.0
    else:
        raise ValidationError(f"synthetic dataset defines classes 0..9, got {c}")
    return img


def generate_synthetic(per_class: int = SYNTHETIC_PER_CLASS) -> Dataset:
    """Deterministic glyph classes with translation, intensity and noise jitter."""
    rng = np.random.default_rng(_SYNTHETIC_CONTENT_SEED)
    images, labels = [], []
    for c in range(SYNTHETIC_CLASSES):
        base = _glyph_template(c)
        for _ in range(per_class):
            img = np.roll(base, int(rng.integers(-2, 3)), axis=0)
            img = np.roll(img, int(rng.integers(-2, 3)), axis=1)
            img = img * float(rng.uniform(0.7, 1.0))
            img = img + rng.normal(0.0, 0.05, base.shape).astype(np.float32)
            images.append(np.clip(img, 0.0, 1.0))
            labels.append(c)
    mat = np.stack(images).astype(np.float32)[:, None, :, :]
    lab = np.asarray(labels, dtype=np.int64)
    ids = [f"synthetic-{i:05d}" for i in range(len(lab))]
    return Dataset(name="synthetic", images=mat, labels=lab, ids=ids)


def _load_mnist(root: str | None) -> Dataset:
    try:
        from torchvision.datasets import MNIST
    except ImportError:
        raise DatasetMissing("torchvision is required for the mnist dataset") from None
    root = root or "./data"
    try:
        parts = [MNIST(root, train=True, download=False), MNIST(root, train=False, download=False)]
    except (RuntimeError, FileNotFoundError) as exc:
        raise DatasetMissing(f"mnist not found under {root}: {exc}") from None
    images, labels = [], []
    for part in parts:
        images.append(part.data.numpy().astype(np.float32) / 255.0)
        labels.append(part.targets.numpy().astype(np.int64))
    mat = np.concatenate(images)[:, None, :, :]
    lab = np.concatenate(labels)
    ids = [f"mnist-{i:05d}" for i in range(len(lab))]
    return Dataset(name="mnist", images=mat, labels=lab, ids=ids)


def _load_hasy_subset(root: str | None) -> Dataset:
    # per-class subdirectories of 32x32 PNGs, resized to 28x28; classes with
    # fewer than 500 samples are dropped
    if not root or not Path(root).is_dir():
        raise DatasetMissing(f"hasy-subset requires a local data root, got {root}")
    from PIL import Image

    images, labels, ids = [], [], []
    class_dirs = sorted(p for p in Path(root).iterdir() if p.is_dir())
    if not class_dirs:
        raise DatasetMissing(f"no class directories under {root}")
    for c, class_dir in enumerate(class_dirs):
        files = sorted(class_dir.glob("*.png"))
        if len(files) < 500:
            continue
        for f in files:
            img = Image.open(f).convert("L").resize((IMAGE_SIZE, IMAGE_SIZE))
            images.append(np.asarray(img, dtype=np.float32) / 255.0)
            labels.append(c)
            ids.append(f"hasy-{class_dir.name}-{f.stem}")
    if not images:
        raise DatasetMissing(f"no class under {root} has >= 500 samples")
    return Dataset(
        name="hasy-subset",
        images=np.stack(images)[:, None, :, :],
        labels=np.asarray(labels, dtype=np.int64),
        ids=ids,
    )


def load_dataset(name: str, root: str | None = None) -> Dataset:
    if name == "synthetic":
        return generate_synthetic()
    if name == "mnist":
        return _load_mnist(root)
    if name == "hasy-subset":
        return _load_hasy_subset(root)
    raise ValidationError(f"unknown dataset {name!r} (mnist, hasy-subset, synthetic)")


def split_per_class(
    labels: np.ndarray,
    classes: tuple[int, ...],
    fractions: tuple[float, float, float],
    seed: int,
) -> dict[str, np.ndarray]:
    """Disjoint per-class train/val/test index split, 60/20/20 by default."""
    rng = np.random.default_rng(seed)
    out = {"train": [], "val": [], "test": []}
    for c in classes:
        idx = np.flatnonzero(labels == c)
        if idx.size == 0:
            raise ValidationError(f"class {c} has no samples")
        perm = rng.permutation(idx)
        n_tr = int(round(fractions[0] * idx.size))
        n_va = int(round(fractions[1] * idx.size))
        out["train"].append(perm[:n_tr])
        out["val"].append(perm[n_tr : n_tr + n_va])
        out["test"].append(perm[n_tr + n_va :])
    return {k: np.concatenate(v) for k, v in out.items()}


def resolve_unknown_classes(spec: TrainSpec, dataset: Dataset) -> tuple[int, ...]:
    if spec.unknown_classes is not None:
        return spec.unknown_classes
    present = sorted(set(int(v) for v in np.unique(dataset.labels)))
    return tuple(c for c in present if c not in set(spec.known_classes))
