"""Splitting, cross-validation, grid search and classification metrics."""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import EmptyMatrix, TooFewPerClass
from .model import Hyperparams, fit_model


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.6
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(labels: Sequence, spec: SplitSpec = SplitSpec()) -> tuple[np.ndarray, np.ndarray]:
    """Positions of the training and validation rows.

    Each class contributes ``round(fraction * size)`` rows to training,
    clamped so both sides keep at least one row of it. Both index arrays are
    sorted.
    """
    labels = np.asarray(labels)
    rng = np.random.default_rng(spec.seed)
    n = len(labels)
    if not spec.stratified:
        perm = rng.permutation(n)
        n_train = min(max(_round_half_up(spec.train_fraction * n), 1), n - 1)
        return np.sort(perm[:n_train]), np.sort(perm[n_train:])
    train, valid = [], []
    for c in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == c)
        if len(members) < 2:
            raise TooFewPerClass(f"class {c!r} has {len(members)} row(s); stratified split needs 2")
        members = members[rng.permutation(len(members))]
        n_train = min(max(_round_half_up(spec.train_fraction * len(members)), 1), len(members) - 1)
        train.append(members[:n_train])
        valid.append(members[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(valid))


def sample_fraction(labels: Sequence, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Stratified ``(kept, rest)`` positions for any fraction in [0, 1]."""
    labels = np.asarray(labels)
    if fraction <= 0.0:
        return np.empty(0, dtype=int), np.arange(len(labels))
    if fraction >= 1.0:
        return np.arange(len(labels)), np.empty(0, dtype=int)
    rng = np.random.default_rng(seed)
    kept, rest = [], []
    for c in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == c)
        members = members[rng.permutation(len(members))]
        k = _round_half_up(fraction * len(members))
        kept.append(members[:k])
        rest.append(members[k:])
    return np.sort(np.concatenate(kept)), np.sort(np.concatenate(rest))


def stratified_folds(labels: Sequence, k: int = 5, seed: int = 0) -> list[np.ndarray]:
    """Assign rows to ``k`` folds, class by class, dealing round-robin.

    The dealing position carries over between classes, so fold sizes differ
    by at most one overall while each class is spread evenly.
    """
    labels = np.asarray(labels)
    if not 2 <= k <= len(labels):
        raise ValueError(f"k must be in [2, {len(labels)}], got {k}")
    rng = np.random.default_rng(seed)
    order = []
    for c in sorted(set(labels.tolist())):
        members = np.flatnonzero(labels == c)
        order.append(members[rng.permutation(len(members))])
    order = np.concatenate(order)
    fold_of = np.empty(len(labels), dtype=int)
    fold_of[order] = np.arange(len(order)) % k
    return [np.flatnonzero(fold_of == f) for f in range(k)]


@dataclass(frozen=True)
class CvResult:
    value: float
    mean_accuracy: float
    accuracy_sd: float
    fold_accuracies: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "accuracy": self.mean_accuracy,
            "accuracy_sd": self.accuracy_sd,
            "fold_accuracies": list(self.fold_accuracies),
        }


def k_fold_cv(
    X: np.ndarray,
    labels: Sequence[str],
    kind: str,
    value=None,
    *,
    k: int = 5,
    seed: int = 0,
    feature_names=None,
    hyper: Hyperparams = Hyperparams(),
) -> CvResult:
    """Stratified k-fold accuracy of ``kind`` at hyperparameter ``value``.

    The standard deviation uses the n-1 denominator.
    """
    X = np.asarray(X, dtype=float)
    labels = np.asarray(labels)
    folds = stratified_folds(labels, k, seed)
    accs = []
    for f, held in enumerate(folds):
        mask = np.ones(len(labels), dtype=bool)
        mask[held] = False
        model = fit_model(kind, X[mask], labels[mask].tolist(), value, feature_names=feature_names,
                          hyper=hyper, seed=seed + f)
        pred = np.array(model.predict(X[held]))
        accs.append(float(np.mean(pred == labels[held])))
    sd = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
    if value is None:
        value = hyper.grid(kind)[1][0]
    return CvResult(value, float(np.mean(accs)), sd, tuple(accs))


def select_best(results: Sequence[CvResult]) -> CvResult:
    """Highest mean accuracy; ties go to the smaller parameter value."""
    if not results:
        raise ValueError("no grid results to choose from")
    return min(results, key=lambda r: (-r.mean_accuracy, r.value))


def grid_search(
    X: np.ndarray,
    labels: Sequence[str],
    kind: str,
    grid: Sequence | None = None,
    *,
    k: int = 5,
    seed: int = 0,
    feature_names=None,
    hyper: Hyperparams = Hyperparams(),
    evaluate: Callable[..., CvResult] | None = None,
    n_jobs: int = 1,
) -> tuple[float, list[CvResult]]:
    """Cross-validate every grid value and return ``(best value, results)``.

    ``evaluate(value)`` replaces k-fold CV when given (used to inject scores).
    Results come back in grid order whatever ``n_jobs`` is.
    """
    if grid is None:
        grid = hyper.grid(kind)[1]
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be non-empty")
    if evaluate is None:
        def evaluate(value):
            return k_fold_cv(X, labels, kind, value, k=k, seed=seed, feature_names=feature_names, hyper=hyper)
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(evaluate, grid))
    else:
        results = [evaluate(v) for v in grid]
    return select_best(results).value, results


# ------------------------------------------------------------------ metrics


@dataclass(frozen=True)
class ConfusionMatrix:
    """``counts[p][a]`` is the number of rows predicted ``p`` with actual ``a``."""

    classes: tuple[str, ...]
    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        k = len(self.classes)
        if counts.shape != (k, k):
            raise ValueError(f"counts must be {k}x{k}, got {counts.shape}")
        if (counts < 0).any():
            raise ValueError("confusion counts must be non-negative")
        object.__setattr__(self, "classes", tuple(self.classes))
        object.__setattr__(self, "counts", counts)

    @classmethod
    def from_labels(cls, actual: Sequence, predicted: Sequence, classes: Sequence | None = None):
        if len(actual) != len(predicted):
            raise ValueError("actual and predicted differ in length")
        if classes is None:
            classes = sorted(set(actual) | set(predicted))
        lookup = {c: i for i, c in enumerate(classes)}
        counts = np.zeros((len(classes), len(classes)), dtype=np.int64)
        for a, p in zip(actual, predicted):
            counts[lookup[p], lookup[a]] += 1
        return cls(tuple(classes), counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvaluationReport:
    per_class: dict[str, ClassMetrics]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    accuracy: float
    confusion: ConfusionMatrix
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "accuracy": self.accuracy,
            "macro": {"precision": self.macro_precision, "recall": self.macro_recall, "f1": self.macro_f1},
            "per_class": {
                c: {"precision": m.precision, "recall": m.recall, "f1": m.f1, "support": m.support}
                for c, m in self.per_class.items()
            },
            "confusion_matrix": {
                "classes": list(self.confusion.classes),
                "layout": "rows=predicted, columns=actual",
                "counts": self.confusion.counts.tolist(),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def compute_metrics(cm: ConfusionMatrix, metadata: dict | None = None) -> EvaluationReport:
    if cm.total == 0:
        raise EmptyMatrix("confusion matrix has no rows")
    counts = cm.counts
    predicted_totals = counts.sum(axis=1)
    actual_totals = counts.sum(axis=0)
    per_class = {}
    for i, c in enumerate(cm.classes):
        tp = int(counts[i, i])
        p = _ratio(tp, int(predicted_totals[i]))
        r = _ratio(tp, int(actual_totals[i]))
        # harmonic mean of p and r, computed from counts to avoid rounding drift
        f1 = _ratio(2 * tp, int(predicted_totals[i]) + int(actual_totals[i]))
        per_class[c] = ClassMetrics(p, r, f1, int(actual_totals[i]))
    k = len(cm.classes)
    return EvaluationReport(
        per_class=per_class,
        macro_precision=sum(m.precision for m in per_class.values()) / k,
        macro_recall=sum(m.recall for m in per_class.values()) / k,
        macro_f1=sum(m.f1 for m in per_class.values()) / k,
        accuracy=int(np.trace(counts)) / cm.total,
        confusion=cm,
        metadata=dict(metadata or {}),
    )


def evaluate_predictions(actual, predicted, classes=None, metadata=None) -> EvaluationReport:
    return compute_metrics(ConfusionMatrix.from_labels(list(actual), list(predicted), classes), metadata)
