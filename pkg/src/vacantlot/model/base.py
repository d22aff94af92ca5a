"""Common fit/predict contract for the five classifiers.

A :class:`TrainedModel` bundles the fitted preprocessor, the class labels
(sorted, so index order is lexicographic) and the fitted estimator. Inputs
are raw design matrices whose columns follow ``feature_names``; the
categorical ``zone`` column carries integer codes.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from ..errors import DegenerateTraining, SchemaMismatch
from ..features import FEATURE_NAMES, FeatureVector
from .bayes import NaiveBayes
from .forest import RandomForest
from .knn import NearestNeighbors
from .mlp import MultilayerPerceptron
from .preprocess import Preprocessor
from .svm import LinearSVM

RANDOM_FOREST = "rf"
KNN = "knn"
NAIVE_BAYES = "nb"
MLP = "mlp"
SVM = "svm"
MAJORITY = "majority"
CLASSIFIERS = (RANDOM_FOREST, KNN, NAIVE_BAYES, MLP, SVM)

FORMAT_NAME = "vacantlot-model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class RandomForestParams:
    n_trees_grid: tuple[int, ...] = (2, 8, 14)
    features_per_split: int | None = None  # None -> floor(sqrt(p))
    max_depth: int | None = None
    min_leaf: int = 1
    bootstrap: bool = True


@dataclass(frozen=True)
class KnnParams:
    k_grid: tuple[int, ...] = (1, 3, 5, 7)


@dataclass(frozen=True)
class MlpParams:
    hidden_grid: tuple[int, ...] = (3, 5, 8, 10)
    learning_rate: float = 0.01
    epochs: int = 500


@dataclass(frozen=True)
class NaiveBayesParams:
    laplace_alpha: float = 1.0
    variance_floor: float = 1e-9


@dataclass(frozen=True)
class SvmParams:
    lambda_grid: tuple[float, ...] = (1e-4, 1e-3, 1e-2)
    epochs: int = 100


@dataclass(frozen=True)
class Hyperparams:
    rf: RandomForestParams = field(default_factory=RandomForestParams)
    knn: KnnParams = field(default_factory=KnnParams)
    mlp: MlpParams = field(default_factory=MlpParams)
    nb: NaiveBayesParams = field(default_factory=NaiveBayesParams)
    svm: SvmParams = field(default_factory=SvmParams)

    def __post_init__(self):
        grids = (self.rf.n_trees_grid, self.knn.k_grid, self.mlp.hidden_grid, self.svm.lambda_grid)
        if any(len(g) == 0 for g in grids):
            raise ValueError("hyperparameter grids must be non-empty")
        if any(v <= 0 for g in grids for v in g):
            raise ValueError("hyperparameter grid values must be positive")

    def grid(self, kind: str) -> tuple:
        """Values tuned by grid search for ``kind`` (name, values)."""
        return {
            RANDOM_FOREST: ("n_trees", self.rf.n_trees_grid),
            KNN: ("k", self.knn.k_grid),
            MLP: ("hidden_size", self.mlp.hidden_grid),
            SVM: ("lambda", self.svm.lambda_grid),
            NAIVE_BAYES: ("laplace_alpha", (self.nb.laplace_alpha,)),
            MAJORITY: ("none", (0,)),
        }[kind]

    def to_dict(self) -> dict:
        return asdict(self)


class MajorityClass:
    """Constant predictor of the most frequent training class (baseline)."""

    def fit(self, X, y, n_classes: int):
        self.n_classes = n_classes
        self.label_ = int(np.argmax(np.bincount(y, minlength=n_classes)))
        return self

    def predict(self, X):
        return np.full(len(X), self.label_, dtype=int)

    def to_dict(self):
        return {"n_classes": self.n_classes, "label": self.label_}

    @classmethod
    def from_dict(cls, d):
        m = cls()
        m.n_classes, m.label_ = d["n_classes"], d["label"]
        return m


_ESTIMATORS = {
    RANDOM_FOREST: RandomForest,
    KNN: NearestNeighbors,
    NAIVE_BAYES: NaiveBayes,
    MLP: MultilayerPerceptron,
    SVM: LinearSVM,
    MAJORITY: MajorityClass,
}


@dataclass
class TrainedModel:
    kind: str
    feature_names: tuple[str, ...]
    classes: tuple[str, ...]
    preprocessor: Preprocessor
    estimator: Any
    hyperparams: dict = field(default_factory=dict)
    seed: int | None = None

    def _matrix(self, rows) -> np.ndarray:
        if len(rows) and isinstance(rows[0], FeatureVector):
            cols = [FEATURE_NAMES.index(f) for f in self.feature_names]
            return np.array([r.as_row() for r in rows], dtype=float)[:, cols]
        X = np.asarray(rows, dtype=float)
        if X.size == 0:
            return X.reshape(0, len(self.feature_names))
        if X.ndim != 2 or X.shape[1] != len(self.feature_names):
            raise SchemaMismatch(
                f"expected {len(self.feature_names)} columns {list(self.feature_names)}, got shape {X.shape}"
            )
        return X

    def predict_indices(self, rows) -> np.ndarray:
        X = self._matrix(rows)
        if len(X) == 0:
            return np.empty(0, dtype=int)
        pre = self.preprocessor
        if self.kind == NAIVE_BAYES:
            return self.estimator.predict(pre.numeric(X), pre.codes(X))
        return self.estimator.predict(pre.transform(X))

    def predict(self, rows) -> list[str]:
        """One label per row; ``rows`` is a raw matrix or FeatureVectors."""
        return [self.classes[i] for i in self.predict_indices(rows)]

    def predict_proba(self, rows) -> np.ndarray:
        if self.kind != NAIVE_BAYES:
            raise NotImplementedError("posterior probabilities are only exposed for naive Bayes")
        X = self._matrix(rows)
        pre = self.preprocessor
        return self.estimator.predict_proba(pre.numeric(X), pre.codes(X))

    def to_dict(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "feature_names": list(self.feature_names),
            "classes": list(self.classes),
            "seed": self.seed,
            "hyperparams": self.hyperparams,
            "preprocessor": self.preprocessor.to_dict(),
            "estimator": self.estimator.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainedModel":
        if d.get("format") != FORMAT_NAME:
            raise SchemaMismatch("not a serialized model")
        if d.get("version") != FORMAT_VERSION:
            raise SchemaMismatch(f"unsupported model format version {d.get('version')}")
        return cls(
            kind=d["kind"],
            feature_names=tuple(d["feature_names"]),
            classes=tuple(d["classes"]),
            preprocessor=Preprocessor.from_dict(d["preprocessor"]),
            estimator=_ESTIMATORS[d["kind"]].from_dict(d["estimator"]),
            hyperparams=d["hyperparams"],
            seed=d["seed"],
        )


def save_model(model: TrainedModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict()) + "\n", encoding="utf-8")


def load_model(path) -> TrainedModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"{path}: not a model file ({exc.msg})") from None
    return TrainedModel.from_dict(doc)


def predict(model: TrainedModel, rows) -> list[str]:
    return model.predict(rows)


# ------------------------------------------------------------------ fitting


def _prepare(X, labels, feature_names):
    X = np.asarray(X, dtype=float)
    feature_names = tuple(FEATURE_NAMES if feature_names is None else feature_names)
    if X.ndim != 2 or X.shape[1] != len(feature_names):
        raise SchemaMismatch(f"design matrix shape {X.shape} does not match {len(feature_names)} features")
    if len(labels) != len(X):
        raise ValueError("labels and rows differ in length")
    classes = tuple(sorted(set(labels)))
    lookup = {c: i for i, c in enumerate(classes)}
    y = np.array([lookup[v] for v in labels], dtype=int)
    pre = Preprocessor.for_features(feature_names).fit(X)
    return X, y, classes, feature_names, pre


def _need_two(classes, kind):
    if len(classes) < 2:
        raise DegenerateTraining(f"{kind} needs at least two classes, got {list(classes)}")


def fit_random_forest(
    X, labels, n_trees: int = 8, *, feature_names=None, params: RandomForestParams = RandomForestParams(),
    seed: int = 0, n_jobs: int = 1,
) -> TrainedModel:
    X, y, classes, names, pre = _prepare(X, labels, feature_names)
    _need_two(classes, "random forest")
    if n_trees < 1:
        raise ValueError("n_trees must be at least 1")
    Z = pre.transform(X)
    mtry = params.features_per_split or max(1, math.isqrt(Z.shape[1]))
    est = RandomForest(n_trees, mtry, params.max_depth, params.min_leaf, params.bootstrap, seed, n_jobs)
    est.fit(Z, y, len(classes))
    hp = {"n_trees": n_trees, "features_per_split": mtry, "max_depth": params.max_depth,
          "min_leaf": params.min_leaf, "bootstrap": params.bootstrap}
    return TrainedModel(RANDOM_FOREST, names, classes, pre, est, hp, seed)


def fit_knn(X, labels, k: int = 1, *, feature_names=None) -> TrainedModel:
    X, y, classes, names, pre = _prepare(X, labels, feature_names)
    if not 1 <= k <= len(y):
        raise ValueError(f"k must be in [1, {len(y)}], got {k}")
    est = NearestNeighbors(k).fit(pre.transform(X), y, len(classes))
    return TrainedModel(KNN, names, classes, pre, est, {"k": k})


def fit_naive_bayes(
    X, labels, *, feature_names=None, params: NaiveBayesParams = NaiveBayesParams()
) -> TrainedModel:
    X, y, classes, names, pre = _prepare(X, labels, feature_names)
    _need_two(classes, "naive Bayes")
    est = NaiveBayes(params.laplace_alpha, params.variance_floor, pre.n_categories)
    est.fit(pre.numeric(X), pre.codes(X), y, len(classes))
    hp = {"laplace_alpha": params.laplace_alpha, "variance_floor": params.variance_floor}
    return TrainedModel(NAIVE_BAYES, names, classes, pre, est, hp)


def fit_mlp(
    X, labels, hidden_size: int = 10, *, feature_names=None, params: MlpParams = MlpParams(), seed: int = 0
) -> TrainedModel:
    X, y, classes, names, pre = _prepare(X, labels, feature_names)
    est = MultilayerPerceptron(hidden_size, params.learning_rate, params.epochs, seed)
    est.fit(pre.transform(X), y, len(classes))
    hp = {"hidden_size": hidden_size, "learning_rate": params.learning_rate, "epochs": params.epochs}
    return TrainedModel(MLP, names, classes, pre, est, hp, seed)


def fit_svm(
    X, labels, lam: float = 1e-3, *, feature_names=None, params: SvmParams = SvmParams(), seed: int = 0,
    n_jobs: int = 1,
) -> TrainedModel:
    X, y, classes, names, pre = _prepare(X, labels, feature_names)
    _need_two(classes, "SVM")
    est = LinearSVM(lam, params.epochs, seed, n_jobs).fit(pre.transform(X), y, len(classes))
    return TrainedModel(SVM, names, classes, pre, est, {"lambda": lam, "epochs": params.epochs}, seed)


def fit_majority(X, labels, *, feature_names=None) -> TrainedModel:
    X, y, classes, names, pre = _prepare(X, labels, feature_names)
    return TrainedModel(MAJORITY, names, classes, pre, MajorityClass().fit(X, y, len(classes)))


def fit_model(
    kind: str,
    X,
    labels: Sequence[str],
    value=None,
    *,
    feature_names=None,
    hyper: Hyperparams = Hyperparams(),
    seed: int = 0,
    n_jobs: int = 1,
) -> TrainedModel:
    """Fit ``kind`` with its tuned hyperparameter set to ``value``.

    ``value`` defaults to the first entry of the kind's grid.
    """
    if kind not in _ESTIMATORS:
        raise ValueError(f"unknown classifier {kind!r}; expected one of {sorted(_ESTIMATORS)}")
    if value is None:
        value = hyper.grid(kind)[1][0]
    if kind == RANDOM_FOREST:
        return fit_random_forest(X, labels, int(value), feature_names=feature_names, params=hyper.rf,
                                 seed=seed, n_jobs=n_jobs)
    if kind == KNN:
        return fit_knn(X, labels, int(value), feature_names=feature_names)
    if kind == NAIVE_BAYES:
        params = NaiveBayesParams(float(value), hyper.nb.variance_floor)
        return fit_naive_bayes(X, labels, feature_names=feature_names, params=params)
    if kind == MLP:
        return fit_mlp(X, labels, int(value), feature_names=feature_names, params=hyper.mlp, seed=seed)
    if kind == SVM:
        return fit_svm(X, labels, float(value), feature_names=feature_names, params=hyper.svm, seed=seed,
                       n_jobs=n_jobs)
    return fit_majority(X, labels, feature_names=feature_names)
