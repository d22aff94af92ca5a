"""Linear SVM trained with Pegasos-style stochastic subgradient steps.

Each class gets a one-vs-rest hyperplane over the inputs plus a constant
bias feature (regularised like every other weight).
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numba
import numpy as np


@numba.njit(cache=True)
def _pegasos(X, y, orders, lam):
    n_feat = X.shape[1]
    w = np.zeros(n_feat)
    radius = 1.0 / np.sqrt(lam)
    t = 0
    for e in range(orders.shape[0]):
        for s in range(orders.shape[1]):
            i = orders[e, s]
            t += 1
            eta = 1.0 / (lam * t)
            margin = 0.0
            for k in range(n_feat):
                margin += w[k] * X[i, k]
            margin *= y[i]
            shrink = 1.0 - eta * lam
            for k in range(n_feat):
                w[k] *= shrink
            if margin < 1.0:
                for k in range(n_feat):
                    w[k] += eta * y[i] * X[i, k]
            norm = 0.0
            for k in range(n_feat):
                norm += w[k] * w[k]
            norm = np.sqrt(norm)
            if norm > radius:
                for k in range(n_feat):
                    w[k] *= radius / norm
    return w


def add_bias(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.hstack([X, np.ones((len(X), 1))])


def objective(w: np.ndarray, X: np.ndarray, y_pm: np.ndarray, lam: float) -> float:
    """Regularised mean hinge loss; ``X`` already carries the bias column."""
    hinge = np.maximum(0.0, 1.0 - y_pm * (X @ w))
    return 0.5 * lam * float(w @ w) + float(hinge.mean())


class LinearSVM:
    def __init__(self, lam: float = 1e-3, epochs: int = 100, seed: int = 0, n_jobs: int = 1):
        if lam <= 0:
            raise ValueError("regularization must be positive")
        self.lam = lam
        self.epochs = epochs
        self.seed = seed
        self.n_jobs = n_jobs

    def _train_one(self, c: int, Xb: np.ndarray, y: np.ndarray) -> np.ndarray:
        rng = np.random.default_rng([self.seed, c])
        orders = np.array([rng.permutation(len(y)) for _ in range(self.epochs)], dtype=np.int64)
        orders = orders.reshape(self.epochs, len(y))
        y_pm = np.where(y == c, 1.0, -1.0)
        return _pegasos(np.ascontiguousarray(Xb), y_pm, orders, self.lam)

    def fit(self, X, y, n_classes: int):
        Xb = add_bias(X)
        y = np.asarray(y, dtype=int)
        self.n_classes = n_classes
        if self.n_jobs > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                rows = list(pool.map(lambda c: self._train_one(c, Xb, y), range(n_classes)))
        else:
            rows = [self._train_one(c, Xb, y) for c in range(n_classes)]
        self.W_ = np.vstack(rows)
        return self

    def decision_function(self, X) -> np.ndarray:
        return add_bias(X) @ self.W_.T

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.decision_function(X), axis=1)

    def to_dict(self) -> dict:
        return {"lam": self.lam, "n_classes": self.n_classes, "W": self.W_.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "LinearSVM":
        m = cls(d["lam"])
        m.n_classes = d["n_classes"]
        m.W_ = np.array(d["W"], dtype=float).reshape(m.n_classes, -1)
        return m
