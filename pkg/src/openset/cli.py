"""Command-line pipeline over the file-based contracts.

Subcommands: fit, calibrate, decide, mix, select, evaluate, sweep, plot.
Every flag has a counterpart in a JSON config file (one section per
subcommand); flags override file values. Exit codes: 0 success,
2 validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .activations import DistanceMetric, load_dump
from .calibrator import (
    CalibrationConfig,
    FittedCalibrator,
    Mode,
    WeightFormula,
    decide,
    fit,
    recalibrate,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    InvalidCounts,
    MissingPrediction,
    OpenSetError,
    ParseError,
)
from .evaluation import (
    FoldDumps,
    Method,
    ProtocolSpec,
    SweepGrid,
    load_reports_json,
    plot_accuracy_vs_tail,
    plot_f_measure_vs_openness,
    sweep,
    write_csv,
    write_reports_json,
)
from .mixture import sample_mixture_batch, select_unknown_candidates, write_mixture_batch


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config: path does not exist: {path}")
    try:
        with open(p, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {path}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"config: {path} must hold a JSON object")
    return cfg


def _opt(args, section: dict, key: str, default=None, required: bool = False):
    value = getattr(args, key, None)
    if value is None:
        value = section.get(key, default)
    if required and value is None:
        raise ConfigError(f"missing required option --{key.replace('_', '-')}")
    return value


def _input_path(value, name: str) -> Path:
    p = Path(value)
    if not p.is_file():
        raise ConfigError(f"{name}: path does not exist: {value}")
    return p


def _out_path(value) -> Path:
    p = Path(value)
    if p.parent and not p.parent.exists():
        p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _int_list(value, name: str) -> list[int]:
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [v for v in str(value).split(",") if v.strip()]
    try:
        return [int(v) for v in items]
    except (TypeError, ValueError):
        raise ConfigError(f"invalid integer list for {name}: {value!r}") from None


def _float_list(value, name: str) -> list[float]:
    if isinstance(value, (list, tuple)):
        items = list(value)
    else:
        items = [v for v in str(value).split(",") if v.strip()]
    try:
        return [float(v) for v in items]
    except (TypeError, ValueError):
        raise ConfigError(f"invalid number list for {name}: {value!r}") from None


def _enum(cls, value, name: str):
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise ConfigError(f"invalid value for {name}: {value!r} (choose from {choices})") from None


def _dump_for_mode(args, section: dict, mode: Mode) -> Path:
    explicit = _opt(args, section, "dump")
    if explicit is not None:
        return _input_path(explicit, "dump")
    key = "dump_netg" if mode is Mode.GOPENMAX else "dump_net"
    value = _opt(args, section, key, required=True)
    return _input_path(value, key.replace("_", "-"))


def _calibration_config(args, section: dict, mode: Mode) -> CalibrationConfig:
    try:
        return CalibrationConfig(
            alpha=int(_opt(args, section, "alpha", 2)),
            epsilon=float(_opt(args, section, "epsilon", 0.0)),
            tail_size=int(_opt(args, section, "tail_size", 20)),
            metric=_enum(DistanceMetric, _opt(args, section, "metric", "euclidean"), "--metric"),
            weight_formula=_enum(
                WeightFormula, _opt(args, section, "weight_formula", "cdf-damping"), "--weight-formula"
            ),
            mode=mode,
            correct_only=bool(_opt(args, section, "correct_only", True)),
        )
    except InvalidCounts as exc:
        raise ConfigError(str(exc)) from None


def cmd_fit(args, config: dict) -> int:
    section = config.get("fit", {})
    mode = _enum(Mode, _opt(args, section, "mode", "openmax"), "--mode")
    dump_path = _dump_for_mode(args, section, mode)
    cfg = _calibration_config(args, section, mode)
    out = _out_path(_opt(args, section, "output", required=True))
    records = load_dump(dump_path)
    calib = fit(records, cfg)
    calib.save(out)
    print(f"fitted {calib.n_classes} class models ({mode.value}) -> {out}")
    return 0


def cmd_calibrate(args, config: dict) -> int:
    section = config.get("calibrate", {})
    calib_path = _input_path(_opt(args, section, "calibrator", required=True), "calibrator")
    dump_path = _input_path(_opt(args, section, "dump", required=True), "dump")
    out = _out_path(_opt(args, section, "output", required=True))
    calib = FittedCalibrator.load(calib_path)
    records = load_dump(dump_path)
    with open(out, "w", encoding="utf-8") as fh:
        for rec in records:
            result = recalibrate(rec.av, calib)
            obj = {
                "id": rec.id,
                "revised_activations": [float(v) for v in result.revised_activations],
                "probabilities": [float(v) for v in result.probabilities],
                "decision": result.decision,
                "unknown_probability": result.unknown_probability,
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
    print(f"calibrated {len(records)} records -> {out}")
    return 0


def cmd_decide(args, config: dict) -> int:
    section = config.get("decide", {})
    in_path = _input_path(_opt(args, section, "input", required=True), "input")
    epsilon = float(_opt(args, section, "epsilon", required=True))
    if not 0.0 <= epsilon <= 1.0:
        raise ConfigError(f"invalid value for --epsilon: {epsilon} (must be in [0, 1])")
    method = _enum(Method, _opt(args, section, "mode", required=True), "--mode")
    out = _out_path(_opt(args, section, "output", required=True))
    mode = None if method is Method.SOFTMAX else (
        Mode.OPENMAX if method is Method.OPENMAX else Mode.GOPENMAX
    )
    n = 0
    with open(in_path, "r", encoding="utf-8") as src, open(out, "w", encoding="utf-8") as dst:
        for lineno, line in enumerate(src, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                probs = obj["probabilities"]
                rid = obj["id"]
            except (json.JSONDecodeError, KeyError, TypeError):
                raise ParseError(f"line {lineno}: expected an object with 'id' and 'probabilities'") from None
            dst.write(json.dumps({"id": rid, "decision": decide(probs, epsilon, mode)}) + "\n")
            n += 1
    print(f"decided {n} records at epsilon={epsilon} -> {out}")
    return 0


def cmd_mix(args, config: dict) -> int:
    section = config.get("mix", {})
    n_classes = int(_opt(args, section, "classes", required=True))
    count = int(_opt(args, section, "count", required=True))
    seed = int(_opt(args, section, "seed", 0))
    sigma = float(_opt(args, section, "sigma", 0.2))
    out = _out_path(_opt(args, section, "output", required=True))
    try:
        vectors = sample_mixture_batch(n_classes, count, seed, sigma)
    except InvalidCounts as exc:
        raise ConfigError(str(exc)) from None
    write_mixture_batch(vectors, out)
    print(f"wrote {count} mixture vectors (N={n_classes}, seed={seed}) -> {out}")
    return 0


def cmd_select(args, config: dict) -> int:
    section = config.get("select", {})
    gen_path = _input_path(_opt(args, section, "generated", required=True), "generated")
    out = _out_path(_opt(args, section, "output", required=True))
    records = [r for r in load_dump(gen_path) if r.split == "generated"]
    selection = select_unknown_candidates(records)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "selected_ids": selection.selected_ids,
                "total_generated": selection.total_generated,
                "rejection_reasons": selection.rejection_reasons,
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    print(
        f"selected {len(selection.selected_ids)} of {selection.total_generated} "
        f"generated records -> {out}"
    )
    return 0


def _protocol(args, section: dict) -> ProtocolSpec:
    known = _int_list(_opt(args, section, "known_classes", required=True), "--known-classes")
    unknown = _int_list(_opt(args, section, "unknown_classes", []), "--unknown-classes")
    folds = _folds(args, section)
    fractions = _float_list(_opt(args, section, "split_fractions", [0.6, 0.2, 0.2]), "--split-fractions")
    try:
        return ProtocolSpec(
            known_classes=tuple(known),
            unknown_test_classes=tuple(unknown),
            n_folds=len(folds),
            split_fractions=tuple(fractions),
        )
    except InvalidCounts as exc:
        raise ConfigError(str(exc)) from None


def _folds(args, section: dict) -> list[dict]:
    net = _opt(args, section, "dump_net")
    netg = _opt(args, section, "dump_netg")
    if net is not None:
        return [{"net": net, "netg": netg}]
    folds = section.get("folds")
    if not folds:
        raise ConfigError("missing dumps: provide --dump-net or a 'folds' list in the config")
    return folds


def _load_dumps(value, name: str):
    """One dump path or a list of paths concatenated (dimensions must agree)."""
    paths = value if isinstance(value, (list, tuple)) else [value]
    records = []
    for p in paths:
        records.extend(load_dump(_input_path(p, name)))
    dims = {r.av.size for r in records}
    if len(dims) > 1:
        raise DimensionMismatch(f"{name}: mixed activation dimensions {sorted(dims)}")
    return records


def _load_folds(folds: list[dict]) -> list[FoldDumps]:
    loaded = []
    for i, spec in enumerate(folds):
        if "net" not in spec or spec["net"] is None:
            raise ConfigError(f"folds[{i}]: missing 'net' dump path")
        net = _load_dumps(spec["net"], f"folds[{i}].net")
        netg = None
        if spec.get("netg"):
            netg = _load_dumps(spec["netg"], f"folds[{i}].netg")
        loaded.append(FoldDumps(net=net, netg=netg))
    return loaded


def _grid(args, section: dict, protocol: ProtocolSpec) -> SweepGrid:
    methods = [
        _enum(Method, m, "--modes")
        for m in _str_list(_opt(args, section, "modes", ["softmax", "openmax"]), "--modes")
    ]
    alphas = _int_list(_opt(args, section, "alphas", [2]), "--alphas")
    tails = _int_list(_opt(args, section, "tail_sizes", [20]), "--tail-sizes")
    epsilons = _float_list(_opt(args, section, "epsilons", [0.0]), "--epsilons")
    counts = _opt(args, section, "unknown_counts")
    unknown_counts = None if counts is None else tuple(_int_list(counts, "--unknown-counts"))
    try:
        grid = SweepGrid(
            methods=tuple(methods),
            alphas=tuple(alphas),
            tail_sizes=tuple(tails),
            epsilons=tuple(epsilons),
            unknown_counts=unknown_counts,
        )
        if unknown_counts is not None:
            for u in unknown_counts:
                if not 0 <= u <= len(protocol.unknown_test_classes):
                    raise InvalidCounts(
                        f"grid field 'unknown_counts' must be in "
                        f"0..{len(protocol.unknown_test_classes)}, got {u}"
                    )
    except InvalidCounts as exc:
        raise ConfigError(str(exc)) from None
    return grid


def _str_list(value, name: str) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return [v.strip() for v in str(value).split(",") if v.strip()]


def _run_sweep(args, section: dict, out_dir: Path) -> int:
    protocol = _protocol(args, section)
    folds = _load_folds(_folds(args, section))
    grid = _grid(args, section, protocol)
    epsilon_policy = _opt(args, section, "epsilon_policy", "grid")
    target_metric = _opt(args, section, "target_metric", "f_measure")
    average = _opt(args, section, "average", "micro")
    metric = _enum(DistanceMetric, _opt(args, section, "metric", "euclidean"), "--metric")
    weight_formula = _enum(
        WeightFormula, _opt(args, section, "weight_formula", "cdf-damping"), "--weight-formula"
    )
    correct_only = bool(_opt(args, section, "correct_only", True))
    jobs = int(_opt(args, section, "jobs", 1))
    try:
        reports = sweep(
            folds,
            protocol,
            grid,
            epsilon_policy=epsilon_policy,
            target_metric=target_metric,
            average=average,
            metric=metric,
            weight_formula=weight_formula,
            correct_only=correct_only,
            jobs=jobs,
        )
    except InvalidCounts as exc:
        raise ConfigError(str(exc)) from None
    out_dir.mkdir(parents=True, exist_ok=True)
    settings = {
        "epsilon_policy": epsilon_policy,
        "target_metric": target_metric,
        "average": average,
        "metric": metric.value,
        "weight_formula": weight_formula.value,
        "correct_only": correct_only,
        "known_classes": list(protocol.known_classes),
        "unknown_test_classes": list(protocol.unknown_test_classes),
        "n_folds": protocol.n_folds,
    }
    write_reports_json(reports, out_dir / "reports.json", settings=settings)
    write_csv(reports, out_dir / "reports.csv")
    print(f"wrote {len(reports)} reports -> {out_dir / 'reports.json'}, {out_dir / 'reports.csv'}")
    return 0


def cmd_evaluate(args, config: dict) -> int:
    section = config.get("evaluate", {})
    out_dir = Path(_opt(args, section, "out_dir", "."))
    return _run_sweep(args, section, out_dir)


def cmd_sweep(args, config: dict) -> int:
    section = config.get("sweep", {})
    out_dir = Path(_opt(args, section, "out_dir", "."))
    return _run_sweep(args, section, out_dir)


def cmd_plot(args, config: dict) -> int:
    section = config.get("plot", {})
    reports_path = _input_path(_opt(args, section, "reports", required=True), "reports")
    out_dir = Path(_opt(args, section, "out_dir", "."))
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = load_reports_json(reports_path)
    f_path = out_dir / "f_measure_vs_openness.svg"
    t_path = out_dir / "accuracy_vs_tail.svg"
    plot_f_measure_vs_openness(reports, f_path)
    plot_accuracy_vs_tail(reports, t_path)
    print(f"wrote {f_path} and {t_path}")
    return 0


def _add_protocol_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--known-classes", dest="known_classes", help="comma-separated known class labels")
    p.add_argument("--unknown-classes", dest="unknown_classes", help="comma-separated unknown test class labels")
    p.add_argument("--split-fractions", dest="split_fractions", help="train,val,test fractions")
    p.add_argument("--dump-net", dest="dump_net", help="activation dump of the base classifier")
    p.add_argument("--dump-netg", dest="dump_netg", help="activation dump of the K+1-class classifier")


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--modes", help="comma-separated methods (softmax,openmax,g-softmax,g-openmax)")
    p.add_argument("--alphas", help="comma-separated top-rank counts")
    p.add_argument("--tail-sizes", dest="tail_sizes", help="comma-separated tail sizes")
    p.add_argument("--epsilons", help="comma-separated thresholds")
    p.add_argument("--unknown-counts", dest="unknown_counts", help="comma-separated unknown-class counts")
    p.add_argument("--epsilon-policy", dest="epsilon_policy", choices=["grid", "val-optimal"])
    p.add_argument("--target-metric", dest="target_metric", choices=["f_measure", "known_accuracy", "unknown_accuracy"])
    p.add_argument("--average", choices=["micro", "macro"])
    p.add_argument("--metric", choices=[m.value for m in DistanceMetric])
    p.add_argument("--weight-formula", dest="weight_formula", choices=[w.value for w in WeightFormula])
    p.add_argument("--correct-only", dest="correct_only", action=argparse.BooleanOptionalAction)
    p.add_argument("--jobs", type=int, help="parallel sweep workers")
    p.add_argument("--out-dir", dest="out_dir", help="output directory for reports")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="openset", description=__doc__)
    parser.add_argument("--config", help="JSON config file; flags override its values")
    # accept --config on either side of the subcommand
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", dest="config_after", help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=type(parser))

    def add_parser(name, **kwargs):
        return sub.add_parser(name, parents=[shared], **kwargs)

    p = add_parser("fit", help="fit per-class Weibull models from a dump")
    p.add_argument("--dump", help="explicit dump path (overrides per-mode paths)")
    p.add_argument("--dump-net", dest="dump_net")
    p.add_argument("--dump-netg", dest="dump_netg")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--alpha", type=int)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--tail-size", dest="tail_size", type=int)
    p.add_argument("--metric", choices=[m.value for m in DistanceMetric])
    p.add_argument("--weight-formula", dest="weight_formula", choices=[w.value for w in WeightFormula])
    p.add_argument("--correct-only", dest="correct_only", action=argparse.BooleanOptionalAction)
    p.add_argument("--output")
    p.set_defaults(func=cmd_fit)

    p = add_parser("calibrate", help="recalibrate a dump with a fitted calibrator")
    p.add_argument("--calibrator")
    p.add_argument("--dump")
    p.add_argument("--output")
    p.set_defaults(func=cmd_calibrate)

    p = add_parser("decide", help="apply the threshold rule to calibrated outputs")
    p.add_argument("--input")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--mode", choices=[m.value for m in Method])
    p.add_argument("--output")
    p.set_defaults(func=cmd_decide)

    p = add_parser("mix", help="sample class-mixture conditioning vectors")
    p.add_argument("--classes", type=int)
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--output")
    p.set_defaults(func=cmd_mix)

    p = add_parser("select", help="select misclassified generated samples as unknowns")
    p.add_argument("--generated", help="dump of generated-split records with predictions")
    p.add_argument("--output")
    p.set_defaults(func=cmd_select)

    p = add_parser("evaluate", help="evaluate a single configuration")
    _add_protocol_flags(p)
    _add_grid_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = add_parser("sweep", help="evaluate a configuration grid")
    _add_protocol_flags(p)
    _add_grid_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = add_parser("plot", help="render report curves to SVG")
    p.add_argument("--reports", help="reports.json produced by evaluate/sweep")
    p.add_argument("--out-dir", dest="out_dir")
    p.set_defaults(func=cmd_plot)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(getattr(args, "config_after", None) or args.config)
        return args.func(args, config)
    except (ConfigError, ParseError, DimensionMismatch, MissingPrediction) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OpenSetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
