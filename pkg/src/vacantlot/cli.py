"""Command-line entry point: ``vacantlot <subcommand> ...``.

Exit codes: 0 success, 1 usage or config error, 2 data error, 3 runtime
error (training diverged or could not start).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DegenerateTraining, NonFiniteLoss
from .evaluation import SplitSpec, evaluate_predictions, grid_search, stratified_split
from .features import (
    ALL_CLASSES,
    BINARY,
    CONVERTED_ONLY,
    FEATURE_NAMES,
    build_dataset,
    read_features,
    task_labels,
    write_features,
    write_geojson,
)
from .geo import QUARTER_MILE_M
from .ingest import Conversion, assemble, load_lots, load_point_layer, load_zoning
from .model import CLASSIFIERS, Hyperparams, fit_model, load_model, save_model

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _write_json(path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


# ------------------------------------------------------------ subcommands


def cmd_build_features(args) -> int:
    layers = assemble(
        args.city,
        load_lots(args.lots),
        load_point_layer(args.libraries, "library"),
        load_point_layer(args.parks, "park"),
        load_point_layer(args.schools, "school"),
        load_point_layer(args.transit, "transit"),
        load_point_layer(args.crime, "crime", args.report_year),
        load_point_layer(args.assessments, "assessment"),
        load_zoning(args.zoning),
    )
    ds = build_dataset(layers, args.radius_m, n_jobs=args.jobs)
    write_features(ds, args.out)
    for layer, n in layers.summary().items():
        print(f"{layer:<17}{n}")
    n = len(ds)
    for flag in ("price_flag", "zone_flag"):
        k = sum(getattr(r, flag) for r in ds.rows)
        print(f"{flag:<17}{k} of {n} rows ({100 * k / n:.1f}%)")
    print(f"wrote {n} rows to {args.out}")
    return EXIT_OK


def _task_name(task: str, mode: str) -> str:
    return BINARY if task == "binary" else mode


def _task_of(classes) -> str:
    """Recover the labelling task a model was trained for from its classes."""
    conversions = {c.value for c in Conversion}
    if not set(classes) & conversions:
        return BINARY
    return ALL_CLASSES if set(classes) - conversions else CONVERTED_ONLY


def cmd_train(args) -> int:
    ds = read_features(args.features)
    task = _task_name(args.task, args.mode)
    positions, labels = task_labels(ds, task)
    labels = np.array(labels)
    X = ds.matrix()[positions]
    split = SplitSpec(args.train_fraction, True, args.seed)
    tr, va = stratified_split(labels, split)
    hyper = Hyperparams()
    param, grid = hyper.grid(args.classifier)
    best, cv = grid_search(X[tr], labels[tr].tolist(), args.classifier, grid, k=args.folds, seed=args.seed,
                           feature_names=FEATURE_NAMES, hyper=hyper, n_jobs=args.jobs)
    model = fit_model(args.classifier, X[tr], labels[tr].tolist(), best, feature_names=FEATURE_NAMES,
                      hyper=hyper, seed=args.seed)
    save_model(model, args.model_out)
    validation = evaluate_predictions(labels[va].tolist(), model.predict(X[va]), model.classes)
    report = {
        "classifier": args.classifier,
        "task": task,
        "seed": args.seed,
        "features": args.features,
        "n_train": int(len(tr)),
        "n_validation": int(len(va)),
        "tuned_parameter": param,
        "chosen_value": best,
        "cv": [r.to_dict() for r in cv],
        "validation": validation.to_dict(),
    }
    report_path = args.report_out or Path(args.model_out).with_suffix(".report.json")
    _write_json(report_path, report)
    if args.holdout_out:
        write_features(ds.subset(sorted(positions[i] for i in va)), args.holdout_out)
    print(f"{param:<12}{'accuracy':>10}{'sd':>8}")
    for r in cv:
        mark = "  <- chosen" if r.value == best else ""
        print(f"{r.value!s:<12}{r.mean_accuracy:>10.4f}{r.accuracy_sd:>8.4f}{mark}")
    print(f"validation accuracy {validation.accuracy:.4f}, macro F1 {validation.macro_f1:.4f}")
    print(f"model written to {args.model_out}; report to {report_path}")
    return EXIT_OK


def _observed(ds, task):
    """Observed labels for ``task``, or None when the file cannot supply them."""
    try:
        positions, labels = task_labels(ds, task)
    except DataError:
        return None
    out = [None] * len(ds)
    for p, lab in zip(positions, labels):
        out[p] = lab
    return out


def cmd_evaluate(args) -> int:
    ds = read_features(args.features)
    model = load_model(args.model)
    task = _task_of(model.classes)
    positions, labels = task_labels(ds, task)
    rows = [ds.rows[p].features for p in positions]
    predicted = model.predict(rows)
    classes = sorted(set(model.classes) | set(labels))
    report = evaluate_predictions(labels, predicted, classes, {
        "classifier": model.kind, "task": task, "features": args.features, "model": args.model,
    })
    Path(args.out).write_text(report.to_json(), encoding="utf-8")
    print(f"accuracy {report.accuracy:.4f}, macro F1 {report.macro_f1:.4f} over {len(labels)} rows")
    return EXIT_OK


def cmd_predict(args) -> int:
    ds = read_features(args.features)
    model = load_model(args.model)
    predicted = model.predict([r.features for r in ds.rows])
    observed = _observed(ds, _task_of(model.classes))
    with Path(args.out).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "predicted"] + (["observed"] if observed else []))
        for i, (r, p) in enumerate(zip(ds.rows, predicted)):
            w.writerow([r.id, p] + ([observed[i] or ""] if observed else []))
    if args.geojson:
        extra = {"predicted": predicted}
        if observed:
            extra["observed"] = observed
        write_geojson(ds, args.geojson, extra)
    print(f"wrote {len(predicted)} predictions to {args.out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiments import run_config

    cells = run_config(args.config, args.out, n_jobs=args.jobs, seed=args.seed)
    print(f"{len(cells)} result cells written to {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import synthesize_from_config

    for d in synthesize_from_config(args.config, args.out):
        print(f"wrote {d}")
    return EXIT_OK


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vacantlot", description="Vacant lot conversion modelling pipeline.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    b = sub.add_parser("build-features", help="compute the determinant table for one city")
    b.add_argument("--city", required=True, help="city name recorded with the dataset")
    for layer in ("lots", "libraries", "parks", "schools", "transit", "crime", "assessments"):
        b.add_argument(f"--{layer}", required=True, metavar="PATH", help=f"{layer} CSV")
    b.add_argument("--zoning", required=True, metavar="PATH", help="zoning GeoJSON FeatureCollection")
    b.add_argument("--radius-m", type=float, default=QUARTER_MILE_M, help="density radius in metres")
    b.add_argument("--report-year", type=int, default=None, help="keep only crime incidents from this year")
    b.add_argument("--jobs", type=int, default=1, help="worker threads")
    b.add_argument("--out", required=True, metavar="PATH", help="features CSV to write")
    b.set_defaults(func=cmd_build_features)

    t = sub.add_parser("train", help="grid-search, fit and save one classifier")
    t.add_argument("--features", required=True, metavar="PATH")
    t.add_argument("--task", choices=("binary", "conversion"), default="binary")
    t.add_argument("--mode", choices=(CONVERTED_ONLY, ALL_CLASSES), default=CONVERTED_ONLY,
                   help="conversion task: adopted lots only, or available lots as a fourth class")
    t.add_argument("--classifier", choices=CLASSIFIERS, required=True)
    t.add_argument("--seed", type=int, required=True)
    t.add_argument("--train-fraction", type=float, default=0.6)
    t.add_argument("--folds", type=int, default=5, help="cross-validation folds")
    t.add_argument("--jobs", type=int, default=1, help="grid values evaluated in parallel")
    t.add_argument("--model-out", required=True, metavar="PATH")
    t.add_argument("--report-out", metavar="PATH", help="training report (default: beside the model)")
    t.add_argument("--holdout-out", metavar="PATH", help="write the validation rows as a features CSV")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a saved model on a labelled features CSV")
    e.add_argument("--features", required=True, metavar="PATH")
    e.add_argument("--model", required=True, metavar="PATH")
    e.add_argument("--out", required=True, metavar="PATH", help="evaluation report JSON")
    e.set_defaults(func=cmd_evaluate)

    pr = sub.add_parser("predict", help="label every lot in a features CSV")
    pr.add_argument("--features", required=True, metavar="PATH")
    pr.add_argument("--model", required=True, metavar="PATH")
    pr.add_argument("--out", required=True, metavar="PATH", help="per-lot predictions CSV")
    pr.add_argument("--geojson", metavar="PATH", help="also write a GeoJSON FeatureCollection")
    pr.set_defaults(func=cmd_predict)

    x = sub.add_parser("experiment", help="run the experiments in a config file")
    x.add_argument("--config", required=True, metavar="PATH")
    x.add_argument("--seed", type=int, required=True, help="seed for every experiment in the file")
    x.add_argument("--jobs", type=int, default=1, help="experiments run in parallel")
    x.add_argument("--out", required=True, metavar="DIR")
    x.set_defaults(func=cmd_experiment)

    s = sub.add_parser("synth", help="generate synthetic cities from a config file")
    s.add_argument("--config", required=True, metavar="PATH")
    s.add_argument("--out", required=True, metavar="DIR")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NonFiniteLoss, DegenerateTraining) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
