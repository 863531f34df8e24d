"""Mixture sampling and generated-sample selection."""

import numpy as np
import pytest

from openset import (
    InvalidCounts,
    MissingPrediction,
    mixture_argmax,
    sample_mixture,
    sample_mixture_batch,
    select_unknown_candidates,
)
from openset.mixture import MixtureVector, load_mixture_batch, write_mixture_batch
from conftest import make_record
from oracles import brute_force_select


def test_single_class_is_forced_to_one():
    for seed in [0, 1, 99]:
        mv = sample_mixture(1, seed)
        assert mv.m.tolist() == [1.0]


def test_components_sum_to_one():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(1, 12))
        seed = int(rng.integers(0, 2**31))
        mv = sample_mixture(n, seed, sigma=float(rng.uniform(0.05, 1.0)))
        assert abs(mv.m.sum() - 1.0) <= 1e-12


def test_monte_carlo_component_means():
    vectors = sample_mixture_batch(5, 10000, rng_seed=123, sigma=0.2)
    mat = np.stack([mv.m for mv in vectors])
    assert np.all(np.abs(mat.mean(axis=0) - 0.2) <= 0.02)


def test_batch_rows_sum_to_one():
    vectors = sample_mixture_batch(6, 5000, rng_seed=7)
    mat = np.stack([mv.m for mv in vectors])
    assert np.max(np.abs(mat.sum(axis=1) - 1.0)) <= 1e-12


def test_sampling_is_reproducible():
    a = sample_mixture(8, 424242)
    b = sample_mixture(8, 424242)
    assert np.array_equal(a.m, b.m)
    ba = sample_mixture_batch(4, 100, rng_seed=5)
    bb = sample_mixture_batch(4, 100, rng_seed=5)
    assert all(np.array_equal(x.m, y.m) for x, y in zip(ba, bb))


def test_invalid_parameters():
    with pytest.raises(InvalidCounts):
        sample_mixture(0, 1)
    with pytest.raises(InvalidCounts):
        sample_mixture(3, 1, sigma=0.0)
    with pytest.raises(InvalidCounts):
        sample_mixture_batch(3, -1, 1)


def test_argmax_and_tie_break():
    assert mixture_argmax(MixtureVector(m=np.array([0.2, 0.7, 0.1]), seed=0)) == 1
    assert mixture_argmax(MixtureVector(m=np.array([0.5, 0.5]), seed=0)) == 0
    assert mixture_argmax(MixtureVector(m=np.array([1.0]), seed=0)) == 0


def gen_record(rid, true, pred):
    return make_record(rid, "generated", true, [0.0, 0.0], predicted=pred)


def test_select_nothing_when_net_agrees():
    records = [gen_record(f"g{i}", i % 3, i % 3) for i in range(10)]
    sel = select_unknown_candidates(records)
    assert sel.selected_ids == []
    assert sel.total_generated == 10
    assert set(sel.rejection_reasons.values()) == {"net_agrees"}


def test_select_everything_when_net_disagrees():
    records = [gen_record(f"g{i}", 0, 1) for i in range(10)]
    sel = select_unknown_candidates(records)
    assert sel.selected_ids == [f"g{i}" for i in range(10)]
    assert sel.rejection_reasons == {}


def test_select_matches_brute_force_filter():
    rng = np.random.default_rng(99)
    records = [
        gen_record(f"g{i}", int(rng.integers(0, 4)), int(rng.integers(0, 4)))
        for i in range(100)
    ]
    sel = select_unknown_candidates(records)
    assert set(sel.selected_ids) == brute_force_select(records)
    # partition invariant
    assert len(sel.selected_ids) + len(sel.rejection_reasons) == sel.total_generated


def test_select_missing_prediction():
    records = [gen_record("g0", 0, 1), make_record("g1", "generated", 0, [0.0, 0.0])]
    with pytest.raises(MissingPrediction) as err:
        select_unknown_candidates(records)
    assert "g1" in str(err.value)


def test_select_is_idempotent():
    rng = np.random.default_rng(5)
    records = [
        gen_record(f"g{i}", int(rng.integers(0, 3)), int(rng.integers(0, 3)))
        for i in range(50)
    ]
    a = select_unknown_candidates(records)
    b = select_unknown_candidates(records)
    assert a.selected_ids == b.selected_ids
    assert a.rejection_reasons == b.rejection_reasons


def test_batch_file_round_trip(tmp_path):
    vectors = sample_mixture_batch(6, 20, rng_seed=11)
    path = tmp_path / "mix.jsonl"
    write_mixture_batch(vectors, path)
    rows = load_mixture_batch(path)
    assert len(rows) == 20
    for row, mv in zip(rows, vectors):
        assert row["seed"] == 11
        assert row["argmax"] == mixture_argmax(mv)
        assert abs(sum(row["m"]) - 1.0) <= 1e-12
