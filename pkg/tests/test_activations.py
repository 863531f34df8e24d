"""Dump loading, MAV computation, and distance metrics."""

import json
import math

import numpy as np
import pytest

from openset import (
    DimensionMismatch,
    DistanceMetric,
    EmptyClass,
    ParseError,
    compute_class_stats,
    distance,
    load_dump,
    write_dump,
)
from conftest import make_record


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    assert load_dump(path) == []


def test_load_single_record(tmp_path):
    path = tmp_path / "one.jsonl"
    path.write_text('{"id":"a","split":"train","true_label":3,"av":[0.1,0.2]}\n')
    records = load_dump(path)
    assert len(records) == 1
    rec = records[0]
    assert rec.id == "a"
    assert rec.split == "train"
    assert rec.true_label == 3
    assert rec.predicted_label is None
    assert rec.av.tolist() == [0.1, 0.2]


def test_load_dimension_mismatch(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(
        '{"id":"a","split":"train","true_label":0,"av":[0.1,0.2]}\n'
        '{"id":"b","split":"train","true_label":0,"av":[0.1,0.2,0.3]}\n'
    )
    with pytest.raises(DimensionMismatch) as err:
        load_dump(path)
    assert "line 2" in str(err.value)


@pytest.mark.parametrize(
    "line",
    [
        "not json",
        '{"id":"","split":"train","true_label":0,"av":[1.0]}',
        '{"id":"a","split":"weird","true_label":0,"av":[1.0]}',
        '{"id":"a","split":"train","true_label":-2,"av":[1.0]}',
        '{"id":"a","split":"train","true_label":0,"av":[]}',
        '{"id":"a","split":"train","true_label":0,"av":[1.0,"x"]}',
        '{"id":"a","split":"train","true_label":0,"predicted_label":"x","av":[1.0]}',
    ],
)
def test_load_parse_errors_carry_line_number(tmp_path, line):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id":"ok","split":"train","true_label":0,"av":[1.0]}\n' + line + "\n")
    with pytest.raises(ParseError) as err:
        load_dump(path)
    assert "line 2" in str(err.value)


def test_write_then_load_round_trip(tmp_path):
    records = [
        make_record("a", "train", 0, [1.0, 2.0], predicted=0),
        make_record("b", "test", -1, [3.0, -4.0]),
    ]
    path = tmp_path / "dump.jsonl"
    write_dump(records, path)
    loaded = load_dump(path)
    assert [r.id for r in loaded] == ["a", "b"]
    assert loaded[0].predicted_label == 0
    assert loaded[1].predicted_label is None
    assert np.array_equal(loaded[1].av, records[1].av)


def test_class_stats_hand_case():
    records = [
        make_record("a", "train", 0, [0.0, 2.0], predicted=0),
        make_record("b", "train", 0, [2.0, 0.0], predicted=0),
    ]
    stats = compute_class_stats(records, 0)
    assert stats.mav.tolist() == [1.0, 1.0]
    assert stats.distances == pytest.approx([math.sqrt(2.0), math.sqrt(2.0)])
    assert stats.n_samples == 2


def test_class_stats_single_point():
    stats = compute_class_stats([make_record("a", "train", 1, [1.0, 1.0], predicted=1)], 1)
    assert stats.mav.tolist() == [1.0, 1.0]
    assert stats.distances == [0.0]


def test_class_stats_correct_only_filters():
    records = [
        make_record("a", "train", 0, [1.0, 0.0], predicted=1),
        make_record("b", "train", 0, [0.0, 1.0], predicted=1),
    ]
    with pytest.raises(EmptyClass):
        compute_class_stats(records, 0, correct_only=True)
    stats = compute_class_stats(records, 0, correct_only=False)
    assert stats.n_samples == 2


def test_class_stats_ignores_other_splits():
    records = [
        make_record("a", "train", 0, [1.0, 1.0], predicted=0),
        make_record("b", "val", 0, [9.0, 9.0], predicted=0),
        make_record("c", "test", 0, [9.0, 9.0], predicted=0),
    ]
    stats = compute_class_stats(records, 0)
    assert stats.n_samples == 1


def test_distance_identity_and_hand_values():
    assert distance([1.0, 2.0], [1.0, 2.0], DistanceMetric.EUCLIDEAN) == 0.0
    assert distance([1.0, 2.0], [1.0, 2.0], DistanceMetric.EUCOS) == 0.0
    assert distance([1.0, 0.0], [0.0, 1.0], DistanceMetric.EUCLIDEAN) == pytest.approx(math.sqrt(2.0))
    assert distance([1.0, 0.0], [0.0, 1.0], DistanceMetric.COSINE) == pytest.approx(1.0)


def test_distance_zero_norm_cosine():
    assert distance([0.0, 0.0], [1.0, 1.0], DistanceMetric.COSINE) == 0.0


def test_distance_length_mismatch():
    with pytest.raises(DimensionMismatch):
        distance([1.0], [1.0, 2.0], DistanceMetric.EUCLIDEAN)


def test_distance_properties():
    rng = np.random.default_rng(12)
    for _ in range(200):
        a, b, c = rng.normal(size=(3, 5))
        for metric in DistanceMetric:
            dab = distance(a, b, metric)
            assert dab >= 0.0
            assert dab == pytest.approx(distance(b, a, metric))
        # triangle inequality for the euclidean metric
        ab = distance(a, b, DistanceMetric.EUCLIDEAN)
        bc = distance(b, c, DistanceMetric.EUCLIDEAN)
        ac = distance(a, c, DistanceMetric.EUCLIDEAN)
        assert ac <= ab + bc + 1e-12


def test_mav_linearity():
    rng = np.random.default_rng(3)
    avs = rng.normal(size=(10, 4))
    records = [make_record(f"r{i}", "train", 0, av, predicted=0) for i, av in enumerate(avs)]
    scaled = [make_record(f"s{i}", "train", 0, 2.5 * av, predicted=0) for i, av in enumerate(avs)]
    m1 = compute_class_stats(records, 0).mav
    m2 = compute_class_stats(scaled, 0).mav
    assert np.allclose(2.5 * m1, m2, rtol=1e-12)


def test_class_stats_permutation_invariant():
    rng = np.random.default_rng(8)
    avs = rng.normal(size=(500, 6))
    records = [make_record(f"r{i}", "train", 2, av, predicted=2) for i, av in enumerate(avs)]
    base = compute_class_stats(records, 2)
    perm = list(records)
    rng.shuffle(perm)
    shuffled = compute_class_stats(perm, 2)
    assert np.allclose(base.mav, shuffled.mav, rtol=1e-9, atol=1e-12)
    assert np.allclose(sorted(base.distances), sorted(shuffled.distances), rtol=1e-9)
