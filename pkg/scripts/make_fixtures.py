#!/usr/bin/env python3
"""Regenerate the synthetic activation dumps under tests/fixtures/.

The fixture simulates a 6-known-class problem (labels 0..5) with three
held-out unknown test classes (labels 7, 8, 9) and a synthetic unknown
class trained into the 7-dim classifier at index 6:

  net_dump.jsonl   6-dim logits from the base classifier
  netg_dump.jsonl  7-dim logits from the classifier trained with the
                   synthetic unknown class at the last index
  generated_dump.jsonl  base-classifier predictions on generated samples
                        (split=generated), for candidate selection

Validation splits include held-out generated samples (true_label -1) so
threshold selection has unknown examples without touching test data.
Deterministic: a fixed seed drives everything.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from openset import ActivationRecord, write_dump  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

K = 6
UNKNOWN_TEST = (7, 8, 9)
SCALE = 6.0
SPREAD = 0.6
SYN_SCALE = 5.0
SYN_SPREAD = 0.8
N_TRAIN, N_VAL, N_TEST = 60, 20, 20
N_GEN_VAL = 40
N_UNKNOWN_TEST = 20
N_GENERATED = 200


def known_logits(rng, c, dim):
    av = rng.normal(0.0, SPREAD, dim)
    av[c] += SCALE
    return av


def record(rid, split, label, av, predicted=None):
    pred = int(np.argmax(av)) if predicted is None else predicted
    return ActivationRecord(
        id=rid, split=split, true_label=label,
        av=np.asarray(av, dtype=np.float64), predicted_label=pred,
    )


def main():
    rng = np.random.default_rng(20250808)
    OUT.mkdir(parents=True, exist_ok=True)
    net, netg = [], []

    # known classes, same sample ids in both dumps
    for c in range(K):
        for split, count in (("train", N_TRAIN), ("val", N_VAL), ("test", N_TEST)):
            for i in range(count):
                rid = f"k{c}-{split[:2]}-{i:03d}"
                net.append(record(rid, split, c, known_logits(rng, c, K)))
                netg.append(record(rid, split, c, known_logits(rng, c, K + 1)))

    # synthetic unknown class: trains the K+1 index of netg
    for i in range(N_TRAIN):
        av = rng.normal(0.0, SYN_SPREAD, K + 1)
        av[K] += SYN_SCALE
        netg.append(record(f"syn-tr-{i:03d}", "train", K, av))

    # held-out generated samples as validation unknowns (true_label -1):
    # the base net sees a two-class blend, the K+1 net recognizes them
    for i in range(N_GEN_VAL):
        rid = f"gen-va-{i:03d}"
        a, b = rng.choice(K, size=2, replace=False)
        av = rng.normal(0.0, SYN_SPREAD, K)
        av[a] += 3.0
        av[b] += 2.5
        net.append(record(rid, "val", -1, av))
        avg = rng.normal(0.0, SYN_SPREAD, K + 1)
        avg[K] += SYN_SCALE
        netg.append(record(rid, "val", -1, avg))

    # unknown test classes: confidently wrong under the base net,
    # mostly captured by the synthetic class under the K+1 net
    for u in UNKNOWN_TEST:
        for i in range(N_UNKNOWN_TEST):
            rid = f"u{u}-te-{i:03d}"
            a, b = rng.choice(K, size=2, replace=False)
            av = rng.normal(0.0, SPREAD, K)
            av[a] += rng.uniform(7.0, 10.0)
            av[b] += rng.uniform(1.0, 3.0)
            net.append(record(rid, "test", u, av))
            avg = rng.normal(0.0, SYN_SPREAD, K + 1)
            avg[K] += rng.uniform(3.0, 5.0)
            avg[a] += rng.uniform(0.5, 2.5)
            netg.append(record(rid, "test", u, avg))

    # generated-split dump for candidate selection (base-net predictions)
    generated = []
    for i in range(N_GENERATED):
        a, b = rng.choice(K, size=2, replace=False)
        av = rng.normal(0.0, SYN_SPREAD, K)
        av[a] += 3.0
        av[b] += 2.5
        generated.append(record(f"gen-{i:04d}", "generated", int(a), av))

    write_dump(net, OUT / "net_dump.jsonl")
    write_dump(netg, OUT / "netg_dump.jsonl")
    write_dump(generated, OUT / "generated_dump.jsonl")
    print(f"wrote {len(net)}, {len(netg)}, {len(generated)} records to {OUT}")


if __name__ == "__main__":
    main()
