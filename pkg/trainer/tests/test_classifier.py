"""Classifier training and the emitted dump structure."""

import json

import pytest

from trainer import NonConvergence, TrainSpec, ValidationError, train_classifier
from conftest import KNOWN


def load_lines(path):
    return [json.loads(line) for line in open(path) if line.strip()]


def test_net_reaches_validation_floor(pipeline):
    assert pipeline.net.val_accuracy >= 0.98
    assert pipeline.net.n_outputs == len(KNOWN)


def test_net_dump_structure(pipeline):
    lines = load_lines(pipeline.net.dump_path)
    assert all(len(l["av"]) == 6 for l in lines)
    assert all(l["predicted_label"] is not None for l in lines)
    splits = {l["split"] for l in lines}
    assert splits == {"train", "val", "test"}
    train_labels = {l["true_label"] for l in lines if l["split"] == "train"}
    assert train_labels == set(range(6))
    test_labels = {l["true_label"] for l in lines if l["split"] == "test"}
    # unknown classes 6..9 are written past the synthetic slot: 7, 8, 9, 10
    assert test_labels == set(range(6)) | {7, 8, 9, 10}
    ids = [l["id"] for l in lines]
    assert len(set(ids)) == len(ids)


def test_netg_dump_structure(pipeline):
    assert pipeline.netg.n_outputs == 7
    assert pipeline.netg.val_accuracy >= 0.95
    lines = load_lines(pipeline.netg.dump_path)
    assert all(len(l["av"]) == 7 for l in lines)
    train_labels = {l["true_label"] for l in lines if l["split"] == "train"}
    assert train_labels == set(range(7))  # synthetic unknowns train at index 6
    val_labels = {l["true_label"] for l in lines if l["split"] == "val"}
    assert -1 in val_labels  # held-out candidates for threshold selection
    candidate_train = [l for l in lines if l["split"] == "train" and l["true_label"] == 6]
    assert candidate_train
    selected = set(json.load(open(pipeline.selection))["selected_ids"])
    assert {l["id"] for l in candidate_train} <= selected


def test_meta_records_label_mapping(pipeline):
    meta = json.load(open(pipeline.net.meta_path))
    assert meta["n_outputs"] == 6
    assert meta["known_classes"] == list(KNOWN)
    assert meta["unknown_test_labels"] == {"6": 7, "7": 8, "8": 9, "9": 10}
    assert meta["val_accuracy"] >= 0.98


def test_nonconvergence_without_training(tmp_path):
    spec = TrainSpec(dataset="synthetic", known_classes=(0, 1, 2, 3), epochs=0, seed=1)
    with pytest.raises(NonConvergence):
        train_classifier(spec, tmp_path)


def test_empty_candidate_file_is_rejected(tmp_path, pipeline):
    empty = tmp_path / "empty.json"
    empty.write_text('{"selected_ids": []}')
    spec = TrainSpec(dataset="synthetic", known_classes=KNOWN, epochs=1, seed=0)
    with pytest.raises(ValidationError):
        train_classifier(
            spec, tmp_path, candidate_ids_file=empty, images_dir=pipeline.root / "images"
        )


def test_candidates_require_images_dir(tmp_path, pipeline):
    spec = TrainSpec(dataset="synthetic", known_classes=KNOWN, epochs=1, seed=0)
    with pytest.raises(ValidationError):
        train_classifier(spec, tmp_path, candidate_ids_file=pipeline.selection)
