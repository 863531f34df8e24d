"""Classifier training and activation-dump emission.

Labels inside dumps are classifier indices: known classes are remapped to
0..K-1 in `known_classes` order, the synthetic unknown class (when
candidate images are supplied) trains at index K, and unknown-class test
records are written with labels K+1, K+2, ... in `unknown_classes` order.
Held-out candidate images go into the val split with true_label -1 so the
downstream threshold selection has unknown examples. The label mapping is
recorded in meta.json next to the dump.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .data import Dataset, TrainSpec, load_dataset, resolve_unknown_classes, split_per_class
from .errors import NonConvergence, ValidationError
from .models import ConvClassifier

VAL_ACCURACY_FLOOR = 0.95


@dataclass
class ClassifierArtifacts:
    model_path: Path
    dump_path: Path
    meta_path: Path
    val_accuracy: float
    n_outputs: int


def _write_dump_line(fh, rid: str, split: str, true_label: int, predicted: int, av) -> None:
    fh.write(
        json.dumps(
            {
                "id": rid,
                "split": split,
                "true_label": int(true_label),
                "predicted_label": int(predicted),
                "av": [float(v) for v in av],
            },
            separators=(",", ":"),
        )
        + "\n"
    )


def load_candidate_images(candidate_ids_file: str | Path, images_dir: str | Path):
    """Candidate ids plus their PNGs, in selection-file order."""
    from PIL import Image

    with open(candidate_ids_file, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    ids = payload.get("selected_ids", [])
    if not ids:
        raise ValidationError(f"candidate file {candidate_ids_file} selects no samples")
    images_dir = Path(images_dir)
    images, kept = [], []
    for rid in ids:
        path = images_dir / f"{rid}.png"
        if not path.is_file():
            raise ValidationError(f"candidate image missing: {path}")
        arr = np.asarray(Image.open(path).convert("L"), dtype=np.float32) / 255.0
        images.append(arr[None, :, :])
        kept.append(rid)
    return kept, np.stack(images)


def _forward_logits(model: ConvClassifier, images: np.ndarray, batch_size: int = 256) -> np.ndarray:
    model.eval()
    outputs = []
    with torch.no_grad():
        for start in range(0, len(images), batch_size):
            batch = torch.from_numpy(images[start : start + batch_size])
            outputs.append(model(batch).numpy())
    return np.concatenate(outputs) if outputs else np.empty((0, model.n_classes))


def train_classifier(
    spec: TrainSpec,
    out_dir: str | Path,
    candidate_ids_file: str | Path | None = None,
    images_dir: str | Path | None = None,
    dump_name: str | None = None,
) -> ClassifierArtifacts:
    """Train the closed-set classifier and write its activation dump.

    Without candidates this is the base K-class net; with a candidate id
    file plus the generated images it trains K+1 classes, the extra class
    on the selected synthetic unknowns.
    """
    torch.manual_seed(spec.seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    dataset = load_dataset(spec.dataset, spec.data_root)
    unknown_classes = resolve_unknown_classes(spec, dataset)
    known = spec.known_classes
    k = len(known)
    index_of = {c: i for i, c in enumerate(known)}
    splits = split_per_class(dataset.labels, known, spec.split_fractions, spec.seed)

    extra = None
    if candidate_ids_file is not None:
        if images_dir is None:
            raise ValidationError("candidate training requires --images-dir")
        cand_ids, cand_images = load_candidate_images(candidate_ids_file, images_dir)
        # keep the synthetic class roughly the size of one known class
        per_known = int(round(len(splits["train"]) / k))
        cap = min(len(cand_ids), per_known)
        rng = np.random.default_rng(spec.seed)
        order = rng.permutation(len(cand_ids))[:cap]
        cand_ids = [cand_ids[i] for i in order]
        cand_images = cand_images[order]
        n_tr = int(round(spec.split_fractions[0] * cap))
        n_va = int(round(spec.split_fractions[1] * cap))
        extra = {
            "train_ids": cand_ids[:n_tr],
            "train_images": cand_images[:n_tr],
            "val_ids": cand_ids[n_tr : n_tr + n_va],
            "val_images": cand_images[n_tr : n_tr + n_va],
        }
        # the 20% tail mirrors the test fraction and is left out entirely

    n_outputs = k + 1 if extra is not None else k
    model = ConvClassifier(n_outputs)
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=spec.learning_rate,
        betas=(spec.beta1, spec.beta2),
        eps=spec.adam_eps,
    )
    loss_fn = nn.CrossEntropyLoss()

    train_images = dataset.images[splits["train"]]
    train_labels = np.array([index_of[int(c)] for c in dataset.labels[splits["train"]]])
    if extra is not None and len(extra["train_ids"]):
        train_images = np.concatenate([train_images, extra["train_images"]])
        train_labels = np.concatenate([train_labels, np.full(len(extra["train_ids"]), k)])

    generator = torch.Generator().manual_seed(spec.seed)
    n = len(train_images)
    for _ in range(spec.epochs):
        perm = torch.randperm(n, generator=generator).numpy()
        model.train()
        for start in range(0, n, spec.batch_size):
            sel = perm[start : start + spec.batch_size]
            x = torch.from_numpy(train_images[sel])
            y = torch.from_numpy(train_labels[sel])
            optimizer.zero_grad()
            loss = loss_fn(model(x), y)
            loss.backward()
            optimizer.step()

    # closed-set validation accuracy over the classifier's own task
    val_images = dataset.images[splits["val"]]
    val_labels = np.array([index_of[int(c)] for c in dataset.labels[splits["val"]]])
    if extra is not None and len(extra["val_ids"]):
        val_images = np.concatenate([val_images, extra["val_images"]])
        val_labels = np.concatenate([val_labels, np.full(len(extra["val_ids"]), k)])
    val_logits = _forward_logits(model, val_images)
    val_accuracy = float((val_logits.argmax(axis=1) == val_labels).mean())
    if val_accuracy < VAL_ACCURACY_FLOOR:
        raise NonConvergence(
            f"val accuracy {val_accuracy:.3f} < {VAL_ACCURACY_FLOOR} after {spec.epochs} epochs"
        )

    dump_path = out_dir / (dump_name or ("netg_dump.jsonl" if extra else "net_dump.jsonl"))
    with open(dump_path, "w", encoding="utf-8") as fh:
        for split in ("train", "val", "test"):
            idx = splits[split]
            logits = _forward_logits(model, dataset.images[idx])
            preds = logits.argmax(axis=1)
            for j, i in enumerate(idx):
                _write_dump_line(
                    fh, dataset.ids[i], split,
                    index_of[int(dataset.labels[i])], preds[j], logits[j],
                )
        if extra is not None:
            for portion, split, label in (("train", "train", k), ("val", "val", -1)):
                images = extra[f"{portion}_images"]
                if not len(images):
                    continue
                logits = _forward_logits(model, images)
                preds = logits.argmax(axis=1)
                for j, rid in enumerate(extra[f"{portion}_ids"]):
                    _write_dump_line(fh, rid, split, label, preds[j], logits[j])
        # unknown classes appear in the test split only, labelled past K
        for pos, c in enumerate(unknown_classes):
            idx = np.flatnonzero(dataset.labels == c)
            u_splits = split_per_class(dataset.labels[idx], (c,), spec.split_fractions, spec.seed)
            test_idx = idx[u_splits["test"]]
            logits = _forward_logits(model, dataset.images[test_idx])
            preds = logits.argmax(axis=1)
            for j, i in enumerate(test_idx):
                _write_dump_line(fh, dataset.ids[i], "test", k + 1 + pos, preds[j], logits[j])

    model_path = out_dir / ("netg_model.pt" if extra else "net_model.pt")
    torch.save(
        {
            "state_dict": model.state_dict(),
            "n_classes": n_outputs,
            "known_classes": list(known),
            "dataset": spec.dataset,
        },
        model_path,
    )
    meta_path = out_dir / ("netg_meta.json" if extra else "net_meta.json")
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "dataset": spec.dataset,
                "n_outputs": n_outputs,
                "known_classes": list(known),
                "known_label_indices": {str(c): index_of[c] for c in known},
                "synthetic_class_index": k if extra else None,
                "unknown_test_labels": {str(c): k + 1 + pos for pos, c in enumerate(unknown_classes)},
                "val_accuracy": val_accuracy,
                "seed": spec.seed,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    return ClassifierArtifacts(
        model_path=model_path,
        dump_path=dump_path,
        meta_path=meta_path,
        val_accuracy=val_accuracy,
        n_outputs=n_outputs,
    )


def load_classifier(path: str | Path) -> ConvClassifier:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    model = ConvClassifier(int(payload["n_classes"]))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model
