"""Metrics and the sweep harness over the checked-in fixture dumps."""

import math

import numpy as np
import pytest

from openset import (
    DimensionMismatch,
    EmptyInput,
    EmptySubset,
    FoldDumps,
    InvalidCounts,
    Method,
    ProtocolSpec,
    SweepGrid,
    UNKNOWN,
    f_measure,
    known_accuracy,
    load_dump,
    openness,
    sweep,
    unknown_accuracy,
)
from openset.evaluation import (
    _choose_epsilon,
    load_reports_json,
    report_rows,
    write_csv,
    write_reports_json,
)
from conftest import make_record


PROTOCOL = ProtocolSpec(known_classes=tuple(range(6)), unknown_test_classes=(7, 8, 9), n_folds=1)


@pytest.fixture(scope="module")
def fold(fixture_dir_module):
    net = load_dump(fixture_dir_module / "net_dump.jsonl")
    netg = load_dump(fixture_dir_module / "netg_dump.jsonl")
    return FoldDumps(net=net, netg=netg)


@pytest.fixture(scope="module")
def fixture_dir_module():
    from conftest import FIXTURES

    return FIXTURES


def test_openness_values():
    assert openness(6, 10, 10) == pytest.approx(0.2254, abs=1e-4)
    assert openness(60, 95, 60) == pytest.approx(0.1201, abs=1e-4)
    # radicand of exactly 1
    assert openness(5, 5, 5) == 0.0
    assert openness(6, 10, 2) == 0.0


def test_openness_monotone_in_test_classes():
    values = [openness(6, 6 + u, 6) for u in range(5)]
    assert values[0] == 0.0
    assert all(b > a for a, b in zip(values, values[1:]))


def test_openness_invalid_counts():
    with pytest.raises(InvalidCounts):
        openness(0, 5, 5)
    with pytest.raises(InvalidCounts):
        openness(5, -1, 5)


def test_f_measure_perfect_and_zero():
    assert f_measure([0, 1, 2], [0, 1, 2]) == 1.0
    assert f_measure([UNKNOWN] * 4, [0, 1, 2, 3]) == 0.0


def test_f_measure_micro_equals_accuracy():
    assert f_measure([0, 1, 2, 2], [0, 1, 2, 0]) == pytest.approx(0.75)
    rng = np.random.default_rng(4)
    for _ in range(50):
        n = int(rng.integers(1, 40))
        preds = [int(v) for v in rng.integers(-1, 4, n)]
        truths = [int(v) for v in rng.integers(-1, 4, n)]
        acc = sum(p == t for p, t in zip(preds, truths)) / n
        assert f_measure(preds, truths) == pytest.approx(acc)


def test_f_measure_macro_flag():
    preds = [0, 0, 1, UNKNOWN]
    truths = [0, 1, 1, UNKNOWN]
    # class 0: P=1/2, R=1 -> 2/3; class 1: P=1, R=1/2 -> 2/3
    assert f_measure(preds, truths, average="macro") == pytest.approx(2.0 / 3.0)
    with pytest.raises(EmptySubset):
        f_measure([UNKNOWN], [UNKNOWN], average="macro")


def test_f_measure_errors():
    with pytest.raises(EmptyInput):
        f_measure([], [])
    with pytest.raises(DimensionMismatch):
        f_measure([0], [0, 1])
    with pytest.raises(InvalidCounts):
        f_measure([0], [0], average="median")


def test_accuracies():
    preds = [0, 1, UNKNOWN, UNKNOWN, 2, UNKNOWN]
    truths = [0, 2, UNKNOWN, UNKNOWN, 2, 1]
    assert known_accuracy(preds, truths) == pytest.approx(0.5)
    assert unknown_accuracy(preds, truths) == pytest.approx(1.0)
    seven_of_ten = [UNKNOWN] * 7 + [0] * 3
    assert unknown_accuracy(seven_of_ten, [UNKNOWN] * 10) == pytest.approx(0.7)


def test_accuracies_empty_subset():
    with pytest.raises(EmptySubset):
        unknown_accuracy([0, 1], [0, 1])
    with pytest.raises(EmptySubset):
        known_accuracy([UNKNOWN], [UNKNOWN])


def test_sweep_single_cell(fold):
    grid = SweepGrid(methods=(Method.SOFTMAX,), alphas=(2,), tail_sizes=(20,), epsilons=(0.5,))
    reports = sweep([fold], PROTOCOL, grid)
    assert len(reports) == 1
    r = reports[0]
    assert r.method is Method.SOFTMAX
    assert r.epsilon == 0.5
    assert r.n_unknown_classes == 3
    assert len(r.folds) == 1
    assert r.error is None
    assert 0.0 <= r.f_measure <= 1.0


def test_softmax_at_zero_epsilon_never_rejects(fold):
    grid = SweepGrid(methods=(Method.SOFTMAX,), alphas=(2,), tail_sizes=(20,), epsilons=(0.0,))
    reports = sweep([fold], PROTOCOL, grid)
    assert reports[0].unknown_accuracy == 0.0


def test_sweep_grid_order_and_openness_ladder(fold):
    grid = SweepGrid(
        methods=(Method.SOFTMAX, Method.G_OPENMAX),
        alphas=(2,),
        tail_sizes=(20,),
        epsilons=(0.0, 0.5),
        unknown_counts=(0, 1, 3),
    )
    reports = sweep([fold], PROTOCOL, grid)
    # cartesian product: 2 methods x 1 alpha x 1 tail x 3 counts x 2 epsilons
    assert len(reports) == 12
    by_u = {r.n_unknown_classes: r.openness for r in reports}
    assert by_u[0] == 0.0
    assert by_u[0] < by_u[1] < by_u[3]
    assert by_u[3] == pytest.approx(1.0 - math.sqrt(12.0 / 15.0))
    # unknown accuracy is undefined with zero unknown classes
    for r in reports:
        if r.n_unknown_classes == 0:
            assert r.unknown_accuracy is None
            assert r.f_measure is not None


def test_sweep_is_deterministic(fold):
    grid = SweepGrid(
        methods=(Method.OPENMAX, Method.G_OPENMAX),
        alphas=(1, 2),
        tail_sizes=(15, 30),
        epsilons=(0.0, 0.3),
    )
    a = sweep([fold], PROTOCOL, grid)
    b = sweep([fold], PROTOCOL, grid)
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_sweep_parallel_matches_serial(fold):
    grid = SweepGrid(
        methods=(Method.SOFTMAX, Method.OPENMAX, Method.G_OPENMAX),
        alphas=(2,),
        tail_sizes=(15, 30),
        epsilons=(0.2,),
    )
    serial = sweep([fold], PROTOCOL, grid, jobs=1)
    parallel = sweep([fold], PROTOCOL, grid, jobs=2)
    assert [r.to_dict() for r in serial] == [r.to_dict() for r in parallel]


def test_sweep_records_per_cell_errors(fold):
    # g-methods without a netg dump must fail per-cell, not abort the sweep
    grid = SweepGrid(
        methods=(Method.SOFTMAX, Method.G_OPENMAX), alphas=(2,), tail_sizes=(20,), epsilons=(0.0,)
    )
    reports = sweep([FoldDumps(net=fold.net, netg=None)], PROTOCOL, grid)
    assert len(reports) == 2
    ok, bad = reports
    assert ok.method is Method.SOFTMAX and ok.error is None
    assert bad.method is Method.G_OPENMAX
    assert bad.error is not None
    assert bad.f_measure is None


def test_sweep_validates_inputs(fold):
    grid = SweepGrid(methods=(Method.SOFTMAX,), alphas=(2,), tail_sizes=(20,), epsilons=(0.0,))
    with pytest.raises(InvalidCounts):
        sweep([fold, fold], PROTOCOL, grid)  # protocol says one fold
    with pytest.raises(InvalidCounts):
        sweep([fold], PROTOCOL, grid, epsilon_policy="test-optimal")
    with pytest.raises(InvalidCounts):
        sweep([fold], PROTOCOL, grid, target_metric="auroc")
    with pytest.raises(InvalidCounts):
        SweepGrid(methods=(Method.SOFTMAX,), alphas=(-1,), tail_sizes=(20,), epsilons=(0.0,))
    with pytest.raises(InvalidCounts):
        SweepGrid(methods=(Method.SOFTMAX,), alphas=(2,), tail_sizes=(1,), epsilons=(0.0,))
    with pytest.raises(InvalidCounts):
        SweepGrid(methods=(Method.SOFTMAX,), alphas=(2,), tail_sizes=(20,), epsilons=(1.5,))
    with pytest.raises(InvalidCounts):
        sweep(
            [fold], PROTOCOL,
            SweepGrid(
                methods=(Method.SOFTMAX,), alphas=(2,), tail_sizes=(20,),
                epsilons=(0.0,), unknown_counts=(4,),
            ),
        )


def test_protocol_validation():
    with pytest.raises(InvalidCounts):
        ProtocolSpec(known_classes=(0, 1), unknown_test_classes=(1, 2))
    with pytest.raises(InvalidCounts):
        ProtocolSpec(known_classes=(), unknown_test_classes=(1,))
    with pytest.raises(InvalidCounts):
        ProtocolSpec(known_classes=(0,), unknown_test_classes=(1,), n_folds=0)
    with pytest.raises(InvalidCounts):
        ProtocolSpec(
            known_classes=(0,), unknown_test_classes=(1,), split_fractions=(0.7, 0.2, 0.2)
        )


def test_epsilon_selection_rejects_test_records():
    rec = make_record("t0", "test", 0, [1.0, 0.0])
    probs = np.array([0.7, 0.3])
    with pytest.raises(ValueError):
        _choose_epsilon([(rec, probs)], PROTOCOL, Method.SOFTMAX, [0.0], "f_measure", "micro")


def test_val_optimal_policy_reports_fold_epsilons(fold):
    grid = SweepGrid(
        methods=(Method.G_OPENMAX,), alphas=(2,), tail_sizes=(20,),
        epsilons=tuple(round(0.05 * i, 2) for i in range(20)),
    )
    reports = sweep([fold], PROTOCOL, grid, epsilon_policy="val-optimal")
    assert len(reports) == 1
    r = reports[0]
    assert r.epsilon is None
    assert r.folds[0].epsilon in grid.epsilons


def test_report_mean_equals_fold_mean(fold):
    grid = SweepGrid(methods=(Method.OPENMAX,), alphas=(2,), tail_sizes=(20,), epsilons=(0.2,))
    r = sweep([fold], PROTOCOL, grid)[0]
    values = [fs.f_measure for fs in r.folds if fs.f_measure is not None]
    assert r.f_measure == pytest.approx(float(np.mean(values)))
    for metric in (r.f_measure, r.known_accuracy, r.unknown_accuracy):
        if metric is not None:
            assert 0.0 <= metric <= 1.0


def test_reports_csv_and_json_round_trip(fold, tmp_path):
    grid = SweepGrid(
        methods=(Method.SOFTMAX, Method.G_OPENMAX), alphas=(2,), tail_sizes=(20,), epsilons=(0.3,)
    )
    reports = sweep([fold], PROTOCOL, grid)
    json_path = tmp_path / "reports.json"
    csv_path = tmp_path / "reports.csv"
    write_reports_json(reports, json_path, settings={"note": "test"})
    write_csv(reports, csv_path)

    loaded = load_reports_json(json_path)
    assert [r.to_dict() for r in loaded] == [r.to_dict() for r in reports]

    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "mode,alpha,epsilon,tail_size,openness,f_measure,known_acc,unknown_acc,fold"
    assert len(lines) == 1 + sum(len(report_rows(r)) for r in reports)


def test_plot_outputs_svg(fold, tmp_path):
    from openset.evaluation import plot_accuracy_vs_tail, plot_f_measure_vs_openness

    grid = SweepGrid(
        methods=(Method.SOFTMAX, Method.G_OPENMAX),
        alphas=(2,),
        tail_sizes=(15, 30),
        epsilons=(0.3,),
        unknown_counts=(1, 3),
    )
    reports = sweep([fold], PROTOCOL, grid)
    f_path = tmp_path / "f.svg"
    t_path = tmp_path / "t.svg"
    plot_f_measure_vs_openness(reports, f_path)
    plot_accuracy_vs_tail(reports, t_path)
    assert f_path.read_text().lstrip().startswith("<?xml")
    assert t_path.read_text().lstrip().startswith("<?xml")
