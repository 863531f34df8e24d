"""Conditional GAN training and mixture-conditioned generation.

Real labels are softened (0.9 by default) for discriminator training.
When the known-class pool is larger than the per-generator budget, the
pool is partitioned into seeded groups and one generator is trained per
group; generation dispatches each mixture vector to the group holding its
argmax class, renormalizing the mixture over that group's slots.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn

from .classifier import _forward_logits, _write_dump_line, load_classifier
from .data import TrainSpec, load_dataset, split_per_class
from .errors import DimensionMismatch, DivergenceDetected, ValidationError
from .models import Discriminator, Generator

DIVERGENCE_FLOOR = 1e-4
DIVERGENCE_PATIENCE = 500


@dataclass
class GanArtifacts:
    checkpoint_path: Path
    n_classes: int
    n_groups: int


def _class_groups(known: tuple[int, ...], group_size: int, seed: int) -> list[list[int]]:
    """Seeded partition of the known-class pool into per-generator groups."""
    if len(known) <= group_size:
        return [list(known)]
    rng = np.random.default_rng(seed)
    order = [known[i] for i in rng.permutation(len(known))]
    n_groups = math.ceil(len(known) / group_size)
    return [sorted(order[g::n_groups]) for g in range(n_groups)]


def train_gan(spec: TrainSpec, out_dir: str | Path) -> GanArtifacts:
    """Train one conditional generator per class group; returns the checkpoint."""
    torch.manual_seed(spec.seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = load_dataset(spec.dataset, spec.data_root)
    splits = split_per_class(dataset.labels, spec.known_classes, spec.split_fractions, spec.seed)
    train_idx = splits["train"]
    groups = _class_groups(spec.known_classes, spec.group_size, spec.seed)

    bce = nn.BCEWithLogitsLoss()
    saved_groups = []
    for group in groups:
        gk = len(group)
        slot_of = {c: i for i, c in enumerate(group)}
        mask = np.isin(dataset.labels[train_idx], group)
        images = dataset.images[train_idx][mask] * 2.0 - 1.0  # tanh range
        labels = np.array([slot_of[int(c)] for c in dataset.labels[train_idx][mask]])

        gen = Generator(gk, spec.noise_dim, spec.latent_code_dim)
        disc = Discriminator(gk, spec.latent_code_dim)
        opt_g = torch.optim.Adam(
            gen.parameters(), lr=spec.learning_rate, betas=(spec.beta1, spec.beta2), eps=spec.adam_eps
        )
        opt_d = torch.optim.Adam(
            disc.parameters(), lr=spec.learning_rate, betas=(spec.beta1, spec.beta2), eps=spec.adam_eps
        )
        generator_rng = torch.Generator().manual_seed(spec.seed + 1)
        collapsed_steps = 0
        n = len(images)
        for _ in range(spec.gan_epochs):
            perm = torch.randperm(n, generator=generator_rng).numpy()
            for start in range(0, n, spec.batch_size):
                sel = perm[start : start + spec.batch_size]
                if len(sel) < 2:
                    continue  # batch-norm needs more than one sample
                x = torch.from_numpy(images[sel])
                c = torch.zeros(len(sel), gk)
                c[torch.arange(len(sel)), torch.from_numpy(labels[sel])] = 1.0

                z = torch.randn(len(sel), spec.noise_dim, generator=generator_rng)
                fake = gen(z, c)

                opt_d.zero_grad()
                real_target = torch.full((len(sel), 1), spec.soft_label)
                d_loss = bce(disc(x, c), real_target) + bce(
                    disc(fake.detach(), c), torch.zeros(len(sel), 1)
                )
                d_loss.backward()
                opt_d.step()

                opt_g.zero_grad()
                g_loss = bce(disc(fake, c), torch.ones(len(sel), 1))
                g_loss.backward()
                opt_g.step()

                if float(d_loss.detach()) < DIVERGENCE_FLOOR:
                    collapsed_steps += 1
                    if collapsed_steps >= DIVERGENCE_PATIENCE:
                        raise DivergenceDetected(
                            f"discriminator loss below {DIVERGENCE_FLOOR} for "
                            f"{DIVERGENCE_PATIENCE} consecutive steps"
                        )
                else:
                    collapsed_steps = 0
        saved_groups.append(
            {
                "classes": list(group),
                "generator": gen.state_dict(),
                "discriminator": disc.state_dict(),
            }
        )

    checkpoint_path = out_dir / "gan_checkpoint.pt"
    torch.save(
        {
            "groups": saved_groups,
            "spec": asdict(spec),
            "n_classes": len(spec.known_classes),
            "known_classes": list(spec.known_classes),
            "image_shape": [1, 28, 28],
        },
        checkpoint_path,
    )
    return GanArtifacts(
        checkpoint_path=checkpoint_path, n_classes=len(spec.known_classes), n_groups=len(groups)
    )


def _load_generators(checkpoint: dict, noise_dim: int, code_dim: int):
    groups = []
    for entry in checkpoint["groups"]:
        gen = Generator(len(entry["classes"]), noise_dim, code_dim)
        gen.load_state_dict(entry["generator"])
        gen.eval()
        groups.append((entry["classes"], gen))
    return groups


def generate(
    checkpoint_path: str | Path,
    mixture_path: str | Path,
    net_model_path: str | Path,
    out_dir: str | Path,
    seed: int = 0,
    val_fraction: float = 0.2,
) -> Path:
    """Render one image per mixture vector and dump the base net's view.

    Writes images/<id>.png plus generated_dump.jsonl where the leading
    records carry split=generated with the mixture argmax as true_label
    and the trailing val_fraction are held out as split=val unknowns
    (true_label -1) for threshold selection.
    """
    from PIL import Image

    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    checkpoint = torch.load(checkpoint_path, map_location="cpu", weights_only=True)
    spec = checkpoint["spec"]
    known = checkpoint["known_classes"]
    n_classes = int(checkpoint["n_classes"])
    slot_of = {c: i for i, c in enumerate(known)}
    generators = _load_generators(checkpoint, int(spec["noise_dim"]), int(spec["latent_code_dim"]))

    rows = []
    with open(mixture_path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rows.append(json.loads(line))
    for row in rows:
        if len(row["m"]) != n_classes:
            raise DimensionMismatch(
                f"mixture dimension {len(row['m'])} != checkpoint classes {n_classes}"
            )

    net = load_classifier(net_model_path)
    if net.n_classes != n_classes:
        raise DimensionMismatch(
            f"base net has {net.n_classes} outputs, checkpoint {n_classes} classes"
        )

    torch_rng = torch.Generator().manual_seed(seed)
    dump_path = out_dir / "generated_dump.jsonl"
    n_val = int(round(val_fraction * len(rows)))
    val_start = len(rows) - n_val

    # group rows by the generator owning their argmax class
    assignments = []
    for row in rows:
        m = np.asarray(row["m"], dtype=np.float32)
        global_argmax = int(np.argmax(m))
        owner = next(
            gi for gi, (classes, _) in enumerate(generators)
            if known[global_argmax] in classes
        )
        classes, _ = generators[owner]
        local = np.array([m[slot_of[c]] for c in classes], dtype=np.float32)
        total = float(local.sum())
        if abs(total) < 1e-6:
            local = np.zeros(len(classes), dtype=np.float32)
            local[classes.index(known[global_argmax])] = 1.0
        else:
            local = local / total
        assignments.append((owner, local, global_argmax))

    rendered = np.empty((len(rows), 1, 28, 28), dtype=np.float32)
    with torch.no_grad():
        for start in range(0, len(rows), 256):
            chunk = list(range(start, min(start + 256, len(rows))))
            z = torch.randn(len(chunk), int(spec["noise_dim"]), generator=torch_rng)
            for owner in {assignments[i][0] for i in chunk}:
                sel = [j for j, i in enumerate(chunk) if assignments[i][0] == owner]
                rows_sel = [chunk[j] for j in sel]
                classes, gen = generators[owner]
                c = torch.from_numpy(np.stack([assignments[i][1] for i in rows_sel]))
                imgs = gen(z[sel], c)
                rendered[rows_sel] = ((imgs + 1.0) / 2.0).clamp(0.0, 1.0).numpy()

    for i, row in enumerate(rows):
        arr = (rendered[i, 0] * 255.0).round().astype(np.uint8)
        Image.fromarray(arr, mode="L").save(out_dir / "images" / f"{row['id']}.png")

    logits = _forward_logits(net, rendered)
    preds = logits.argmax(axis=1)
    with open(dump_path, "w", encoding="utf-8") as fh:
        for i, row in enumerate(rows):
            if i < val_start:
                _write_dump_line(fh, row["id"], "generated", assignments[i][2], preds[i], logits[i])
            else:
                _write_dump_line(fh, row["id"], "val", -1, preds[i], logits[i])
    return dump_path
