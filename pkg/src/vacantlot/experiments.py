"""The four studies: feature subsets, within-city selection, conversion type
prediction and cross-city transfer (pure and mixed training).

Each study returns EvaluationReports keyed by classifier; :func:`run_config`
drives a whole config file and writes one JSON report per cell plus a
``summary.csv``.
"""
from __future__ import annotations

import configparser
import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, InvalidFractions
from .evaluation import EvaluationReport, SplitSpec, evaluate_predictions, grid_search, sample_fraction, stratified_split
from .features import (
    ALL_CLASSES,
    BINARY,
    CONVERTED_ONLY,
    FEATURE_NAMES,
    ModelingDataset,
    build_dataset,
    read_features,
    task_labels,
)
from .ingest import Status, load_city
from .model import CLASSIFIERS, KNN, RANDOM_FOREST, Hyperparams, fit_model

FEATURE_SUBSETS = (
    ("libDist", "parkDist", "schoolDist"),
    ("transitDist", "zone"),
    ("vacantDensity", "crimeDensity"),
)
ADOPT = Status.ADOPT.value
CROSS_CITY_CLASSIFIERS = (RANDOM_FOREST, KNN)
EXPERIMENT_KINDS = ("feature_subsets", "within_city_binary", "conversion_type", "cross_city")


def train_and_evaluate(
    X_train: np.ndarray,
    y_train: Sequence[str],
    X_eval: np.ndarray,
    y_eval: Sequence[str],
    kind: str,
    *,
    seed: int = 0,
    hyper: Hyperparams = Hyperparams(),
    k: int = 5,
    feature_names=FEATURE_NAMES,
    grid: Sequence | None = None,
    metadata: dict | None = None,
) -> EvaluationReport:
    """Grid-search ``kind`` by k-fold CV on the training rows, refit on all of
    them and score the evaluation rows."""
    y_train = list(y_train)
    param_name, default_grid = hyper.grid(kind)
    best, cv = grid_search(
        X_train, y_train, kind, default_grid if grid is None else grid,
        k=k, seed=seed, feature_names=feature_names, hyper=hyper,
    )
    model = fit_model(kind, X_train, y_train, best, feature_names=feature_names, hyper=hyper, seed=seed)
    classes = sorted(set(y_train) | set(y_eval))
    meta = {
        "classifier": kind,
        "seed": seed,
        "features": list(feature_names),
        "n_train": len(y_train),
        "n_eval": len(y_eval),
        "tuned_parameter": param_name,
        "chosen_value": best,
        "cv": [r.to_dict() for r in cv],
    }
    meta.update(metadata or {})
    return evaluate_predictions(list(y_eval), model.predict(X_eval), classes, meta)


def _split(labels, split: SplitSpec):
    tr, va = stratified_split(labels, split)
    return tr, va


def run_feature_subsets(
    dataset: ModelingDataset,
    seed: int = 0,
    *,
    subsets: Sequence[Sequence[str]] = FEATURE_SUBSETS,
    n_trees: int = 8,
    split: SplitSpec | None = None,
    hyper: Hyperparams = Hyperparams(),
) -> list[tuple[tuple[str, ...], EvaluationReport]]:
    """Random forest on each feature subset; the adopt class is the one to read."""
    split = split or SplitSpec(seed=seed)
    _, labels = task_labels(dataset, BINARY)
    labels = np.array(labels)
    tr, va = _split(labels, split)
    out = []
    for subset in subsets:
        X = dataset.matrix(subset)
        report = train_and_evaluate(
            X[tr], labels[tr], X[va], labels[va], RANDOM_FOREST,
            seed=seed, hyper=hyper, feature_names=tuple(subset), grid=[n_trees],
            metadata={"experiment": "feature_subsets", "city": dataset.city, "subset": list(subset)},
        )
        out.append((tuple(subset), report))
    return out


def run_within_city_binary(
    dataset: ModelingDataset,
    classifiers: Sequence[str] = CLASSIFIERS,
    seed: int = 0,
    *,
    split: SplitSpec | None = None,
    hyper: Hyperparams = Hyperparams(),
    k: int = 5,
) -> dict[str, EvaluationReport]:
    split = split or SplitSpec(seed=seed)
    _, labels = task_labels(dataset, BINARY)
    labels = np.array(labels)
    X = dataset.matrix()
    tr, va = _split(labels, split)
    meta = {"experiment": "within_city_binary", "city": dataset.city, "train_fraction": split.train_fraction}
    return {
        kind: train_and_evaluate(X[tr], labels[tr], X[va], labels[va], kind, seed=seed, hyper=hyper, k=k,
                                 metadata=meta)
        for kind in classifiers
    }


def run_conversion_type(
    dataset: ModelingDataset,
    classifiers: Sequence[str] = CLASSIFIERS,
    seed: int = 0,
    mode: str = CONVERTED_ONLY,
    *,
    split: SplitSpec | None = None,
    hyper: Hyperparams = Hyperparams(),
    k: int = 5,
) -> dict[str, EvaluationReport]:
    """Predict the conversion type.

    ``converted_only`` is the three-class problem over adopted lots; ``all``
    adds available lots as a fourth class.
    """
    if mode not in (CONVERTED_ONLY, ALL_CLASSES):
        raise ValueError(f"mode must be {CONVERTED_ONLY!r} or {ALL_CLASSES!r}")
    split = split or SplitSpec(seed=seed)
    positions, labels = task_labels(dataset, mode)
    labels = np.array(labels)
    X = dataset.matrix()[positions]
    tr, va = _split(labels, split)
    meta = {"experiment": "conversion_type", "city": dataset.city, "mode": mode,
            "train_fraction": split.train_fraction}
    return {
        kind: train_and_evaluate(X[tr], labels[tr], X[va], labels[va], kind, seed=seed, hyper=hyper, k=k,
                                 metadata=meta)
        for kind in classifiers
    }


def training_set_label(source: str, source_fraction: float, target: str, target_fraction: float) -> str:
    """Row label in the style ``Baltimore: 100% / Philadelphia: 25%``."""
    def pct(f):
        return f"{f * 100:g}%"

    parts = [f"{source}: {pct(source_fraction)}"]
    if target_fraction > 0:
        parts.append(f"{target}: {pct(target_fraction)}")
    return " / ".join(parts)


@dataclass(frozen=True)
class CrossCitySplit:
    """Row positions used by one cross-city configuration."""

    source_train: np.ndarray
    target_train: np.ndarray
    eval_city: str  # "source" or "target"
    eval_rows: np.ndarray


def cross_city_split(source_labels, target_labels, source_fraction: float, target_fraction: float,
                     seed: int = 0) -> CrossCitySplit:
    """Training rows from both cities and the held-out evaluation rows.

    Evaluation uses the remainder of whichever city contributed less than
    100%. Exactly one fraction must be below 1.
    """
    for f in (source_fraction, target_fraction):
        if not 0.0 <= f <= 1.0:
            raise InvalidFractions(f"fractions must lie in [0, 1], got {f}")
    if (source_fraction < 1.0) == (target_fraction < 1.0):
        raise InvalidFractions(
            "exactly one city must be fully included; the other supplies the evaluation rows"
        )
    s_keep, s_rest = sample_fraction(source_labels, source_fraction, seed)
    t_keep, t_rest = sample_fraction(target_labels, target_fraction, seed + 1)
    if source_fraction < 1.0:
        return CrossCitySplit(s_keep, t_keep, "source", s_rest)
    return CrossCitySplit(s_keep, t_keep, "target", t_rest)


def run_cross_city(
    source: ModelingDataset,
    target: ModelingDataset,
    classifiers: Sequence[str] = CROSS_CITY_CLASSIFIERS,
    seed: int = 0,
    source_fraction: float = 1.0,
    target_fraction: float = 0.0,
    *,
    hyper: Hyperparams = Hyperparams(),
    k: int = 5,
) -> dict[str, EvaluationReport]:
    """Train on ``source_fraction`` of one city plus ``target_fraction`` of the
    other (binary adopt/available labels) and evaluate on the held-out rest."""
    _, s_labels = task_labels(source, BINARY)
    _, t_labels = task_labels(target, BINARY)
    s_labels, t_labels = np.array(s_labels), np.array(t_labels)
    plan = cross_city_split(s_labels, t_labels, source_fraction, target_fraction, seed)
    Xs, Xt = source.matrix(), target.matrix()
    X_train = np.vstack([Xs[plan.source_train], Xt[plan.target_train]])
    y_train = np.concatenate([s_labels[plan.source_train], t_labels[plan.target_train]])
    if plan.eval_city == "source":
        X_eval, y_eval, eval_name = Xs[plan.eval_rows], s_labels[plan.eval_rows], source.city
    else:
        X_eval, y_eval, eval_name = Xt[plan.eval_rows], t_labels[plan.eval_rows], target.city
    meta = {
        "experiment": "cross_city",
        "source": source.city,
        "target": target.city,
        "source_fraction": source_fraction,
        "target_fraction": target_fraction,
        "training_set": training_set_label(source.city, source_fraction, target.city, target_fraction),
        "evaluation_set": f"{eval_name} (held out)",
    }
    return {
        kind: train_and_evaluate(X_train, y_train, X_eval, y_eval, kind, seed=seed, hyper=hyper, k=k,
                                 metadata=meta)
        for kind in classifiers
    }


# --------------------------------------------------------------- configs


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    datasets: tuple[str, ...]
    classifiers: tuple[str, ...] = CLASSIFIERS
    seed: int = 0
    split: SplitSpec = field(default_factory=SplitSpec)
    hyper: Hyperparams = field(default_factory=Hyperparams)
    folds: int = 5
    mode: str = CONVERTED_ONLY
    source_fraction: float = 1.0
    target_fraction: float = 0.0
    radius_m: float | None = None

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"[{self.name}] unknown experiment {self.kind!r}")
        if self.kind == "cross_city":
            if len(self.datasets) != 2 or self.datasets[0] == self.datasets[1]:
                raise ConfigError(f"[{self.name}] cross_city needs two distinct cities (source, target)")
            for f in (self.source_fraction, self.target_fraction):
                if not 0.0 <= f <= 1.0:
                    raise ConfigError(f"[{self.name}] fractions must lie in [0, 1]")
        elif len(self.datasets) != 1:
            raise ConfigError(f"[{self.name}] {self.kind} takes exactly one city")
        unknown = set(self.classifiers) - set(CLASSIFIERS)
        if unknown:
            raise ConfigError(f"[{self.name}] unknown classifiers {sorted(unknown)}")


def _grid(raw: str, cast):
    return tuple(cast(v) for v in raw.split(",") if v.strip())


def read_experiment_config(path, seed: int | None = None) -> list[ExperimentConfig]:
    """Parse an experiment file: a ``[DEFAULT]`` block plus one section per run.

    Recognised keys: ``experiment``, ``city`` (one dataset) or ``source`` and
    ``target``, ``classifiers``, ``seed``, ``train_fraction``, ``folds``,
    ``mode``, ``source_fraction``, ``target_fraction``, ``radius_m`` and the
    grids ``rf_trees``, ``knn_k``, ``mlp_hidden``, ``svm_lambda``. Dataset
    paths are features CSVs or city directories, relative to the file.
    A non-None ``seed`` overrides every section's seed.
    """
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with path.open(encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read experiment config {path}: {exc}") from None
    known = {
        "experiment", "city", "source", "target", "classifiers", "seed", "train_fraction", "folds", "mode",
        "source_fraction", "target_fraction", "radius_m", "rf_trees", "knn_k", "mlp_hidden", "svm_lambda",
    }
    base = path.parent
    configs = []
    for name in parser.sections():
        sec = parser[name]
        unknown = set(sec) - known
        if unknown:
            raise ConfigError(f"[{name}] unknown keys {sorted(unknown)}")
        try:
            kind = sec.get("experiment", "")
            if kind == "cross_city":
                datasets = (sec["source"], sec["target"])
            else:
                datasets = (sec["city"],)
            datasets = tuple(str((base / d).resolve()) for d in datasets)
            d = Hyperparams()
            rf = d.rf if "rf_trees" not in sec else type(d.rf)(n_trees_grid=_grid(sec["rf_trees"], int))
            knn = d.knn if "knn_k" not in sec else type(d.knn)(k_grid=_grid(sec["knn_k"], int))
            mlp = d.mlp if "mlp_hidden" not in sec else type(d.mlp)(hidden_grid=_grid(sec["mlp_hidden"], int))
            svm = d.svm if "svm_lambda" not in sec else type(d.svm)(lambda_grid=_grid(sec["svm_lambda"], float))
            classifiers = _grid(sec.get("classifiers", ""), str.strip)
            if not classifiers:
                classifiers = CROSS_CITY_CLASSIFIERS if kind == "cross_city" else CLASSIFIERS
            run_seed = sec.getint("seed", 0) if seed is None else seed
            configs.append(
                ExperimentConfig(
                    name=name,
                    kind=kind,
                    datasets=datasets,
                    classifiers=classifiers,
                    seed=run_seed,
                    split=SplitSpec(sec.getfloat("train_fraction", 0.6), True, run_seed),
                    hyper=Hyperparams(rf=rf, knn=knn, mlp=mlp, nb=d.nb, svm=svm),
                    folds=sec.getint("folds", 5),
                    mode=sec.get("mode", CONVERTED_ONLY),
                    source_fraction=sec.getfloat("source_fraction", 1.0),
                    target_fraction=sec.getfloat("target_fraction", 0.0),
                    radius_m=sec.getfloat("radius_m") if "radius_m" in sec else None,
                )
            )
        except KeyError as exc:
            raise ConfigError(f"[{name}] missing key {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"[{name}] {exc}") from None
    if not configs:
        raise ConfigError(f"{path}: no experiment sections")
    return configs


def load_dataset(path, radius_m: float | None = None) -> ModelingDataset:
    """A features CSV, or a city directory whose features are computed here."""
    p = Path(path)
    if p.is_dir():
        layers = load_city(p)
        return build_dataset(layers) if radius_m is None else build_dataset(layers, radius_m)
    return read_features(p)


@dataclass
class Cell:
    experiment: str
    classifier: str
    label: str
    report: EvaluationReport


def run_experiment(config: ExperimentConfig, cache: dict | None = None) -> list[Cell]:
    cache = {} if cache is None else cache

    def data(p):
        key = (p, config.radius_m)
        if key not in cache:
            cache[key] = load_dataset(p, config.radius_m)
        return cache[key]

    kw = dict(hyper=config.hyper, k=config.folds)
    if config.kind == "feature_subsets":
        ds = data(config.datasets[0])
        rows = run_feature_subsets(ds, config.seed, split=config.split, hyper=config.hyper)
        return [Cell(config.name, RANDOM_FOREST, "+".join(s), r) for s, r in rows]
    if config.kind == "within_city_binary":
        ds = data(config.datasets[0])
        reports = run_within_city_binary(ds, config.classifiers, config.seed, split=config.split, **kw)
        return [Cell(config.name, c, ds.city, r) for c, r in reports.items()]
    if config.kind == "conversion_type":
        ds = data(config.datasets[0])
        reports = run_conversion_type(ds, config.classifiers, config.seed, config.mode, split=config.split, **kw)
        return [Cell(config.name, c, f"{ds.city} ({config.mode})", r) for c, r in reports.items()]
    src, tgt = data(config.datasets[0]), data(config.datasets[1])
    reports = run_cross_city(src, tgt, config.classifiers, config.seed, config.source_fraction,
                             config.target_fraction, **kw)
    return [Cell(config.name, c, r.metadata["training_set"], r) for c, r in reports.items()]


SUMMARY_COLUMNS = ("experiment", "classifier", "setting", "class", "precision", "recall", "f1", "accuracy",
                   "chosen_value")


def summary_rows(cells: Sequence[Cell]) -> list[list[str]]:
    """Per-class rows plus an ``overall (mean)`` row for every cell."""
    rows = []
    for cell in cells:
        r = cell.report
        chosen = r.metadata.get("chosen_value", "")
        for cls, m in r.per_class.items():
            rows.append([cell.experiment, cell.classifier, cell.label, cls, f"{m.precision:.4f}",
                         f"{m.recall:.4f}", f"{m.f1:.4f}", f"{r.accuracy:.4f}", str(chosen)])
        rows.append([cell.experiment, cell.classifier, cell.label, "overall (mean)", f"{r.macro_precision:.4f}",
                     f"{r.macro_recall:.4f}", f"{r.macro_f1:.4f}", f"{r.accuracy:.4f}", str(chosen)])
    return rows


def summary_csv(cells: Sequence[Cell]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    w.writerows(summary_rows(cells))
    return buf.getvalue()


def _slug(text: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in text)


def run_config(path, out_dir, n_jobs: int = 1, seed: int | None = None) -> list[Cell]:
    """Run every experiment in a config file and write its results.

    Experiments may run concurrently; outputs are assembled in declaration
    order, so files are identical for any ``n_jobs``.
    """
    configs = read_experiment_config(path, seed)
    # load every dataset once, up front, so workers only read the cache
    cache: dict = {}
    for cfg in configs:
        for p in cfg.datasets:
            key = (p, cfg.radius_m)
            if key not in cache:
                cache[key] = load_dataset(p, cfg.radius_m)
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            per_config = list(pool.map(lambda c: run_experiment(c, cache), configs))
    else:
        per_config = [run_experiment(c, cache) for c in configs]
    cells = [cell for group in per_config for cell in group]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i, cell in enumerate(cells):
        fname = f"{i:03d}_{_slug(cell.experiment)}_{_slug(cell.classifier)}_{_slug(cell.label)}.json"
        (out / fname).write_text(cell.report.to_json(), encoding="utf-8")
    (out / "summary.csv").write_text(summary_csv(cells), encoding="utf-8")
    return cells
