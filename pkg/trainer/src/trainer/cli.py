"""Trainer command line: train-net, train-gan, generate, train-netg.

Exit codes mirror the consumer CLI: 0 success, 2 validation error,
1 runtime error (non-convergence, divergence, missing datasets).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .classifier import train_classifier
from .data import TrainSpec
from .errors import TrainerError, ValidationError
from .gan import generate, train_gan


def _classes(value: str, name: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in str(value).split(",") if v.strip())
    except ValueError:
        raise ValidationError(f"invalid integer list for {name}: {value!r}") from None


def _spec(args, gan: bool = False) -> TrainSpec:
    kwargs = {
        "dataset": args.dataset,
        "known_classes": _classes(args.known, "--known"),
        "seed": args.seed,
        "batch_size": args.batch_size,
        "data_root": args.data_root,
    }
    if getattr(args, "unknown", None):
        kwargs["unknown_classes"] = _classes(args.unknown, "--unknown")
    if gan:
        kwargs["gan_epochs"] = args.epochs
        if args.group_size:
            kwargs["group_size"] = args.group_size
    else:
        kwargs["epochs"] = args.epochs
    return TrainSpec(**kwargs)


def cmd_train_net(args) -> int:
    spec = _spec(args)
    artifacts = train_classifier(spec, args.out_dir)
    print(
        f"trained {artifacts.n_outputs}-class net, val accuracy "
        f"{artifacts.val_accuracy:.4f} -> {artifacts.dump_path}"
    )
    return 0


def cmd_train_netg(args) -> int:
    spec = _spec(args)
    artifacts = train_classifier(
        spec, args.out_dir,
        candidate_ids_file=args.candidates,
        images_dir=args.images_dir,
    )
    print(
        f"trained {artifacts.n_outputs}-class net (with synthetic unknowns), "
        f"val accuracy {artifacts.val_accuracy:.4f} -> {artifacts.dump_path}"
    )
    return 0


def cmd_train_gan(args) -> int:
    spec = _spec(args, gan=True)
    artifacts = train_gan(spec, args.out_dir)
    print(
        f"trained conditional GAN over {artifacts.n_classes} classes "
        f"in {artifacts.n_groups} group(s) -> {artifacts.checkpoint_path}"
    )
    return 0


def cmd_generate(args) -> int:
    for name, value in (("--checkpoint", args.checkpoint), ("--mixtures", args.mixtures),
                        ("--net-model", args.net_model)):
        if not Path(value).is_file():
            raise ValidationError(f"{name}: path does not exist: {value}")
    dump = generate(
        args.checkpoint, args.mixtures, args.net_model, args.out_dir,
        seed=args.seed, val_fraction=args.val_fraction,
    )
    print(f"generated samples -> {dump}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="openset-trainer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, epochs_default):
        p.add_argument("--dataset", default="synthetic",
                       choices=["mnist", "hasy-subset", "synthetic"])
        p.add_argument("--known", required=True, help="comma-separated known class ids")
        p.add_argument("--unknown", help="comma-separated unknown class ids (default: the rest)")
        p.add_argument("--epochs", type=int, default=epochs_default)
        p.add_argument("--batch-size", dest="batch_size", type=int, default=64)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--data-root", dest="data_root")
        p.add_argument("--out-dir", dest="out_dir", required=True)

    p = sub.add_parser("train-net", help="train the base K-class classifier")
    common(p, epochs_default=20)
    p.set_defaults(func=cmd_train_net)

    p = sub.add_parser("train-netg", help="train the K+1 classifier with selected candidates")
    common(p, epochs_default=20)
    p.add_argument("--candidates", required=True, help="selection JSON with selected_ids")
    p.add_argument("--images-dir", dest="images_dir", required=True)
    p.set_defaults(func=cmd_train_netg)

    p = sub.add_parser("train-gan", help="train the conditional generator")
    common(p, epochs_default=50)
    p.add_argument("--group-size", dest="group_size", type=int)
    p.set_defaults(func=cmd_train_gan)

    p = sub.add_parser("generate", help="render mixture-conditioned samples")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--mixtures", required=True)
    p.add_argument("--net-model", dest="net_model", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-fraction", dest="val_fraction", type=float, default=0.2)
    p.add_argument("--out-dir", dest="out_dir", required=True)
    p.set_defaults(func=cmd_generate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
