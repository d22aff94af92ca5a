from __future__ import annotations

import numpy as np


class NearestNeighbors:
    """Majority vote among the k nearest stored rows (Euclidean).

    Distance ties go to the smaller training row index, vote ties to the
    smaller class index.
    """

    def __init__(self, k: int = 1, chunk: int = 256):
        if k < 1:
            raise ValueError("k must be at least 1")
        self.k = k
        self.chunk = chunk

    def fit(self, X, y, n_classes: int):
        X = np.asarray(X, dtype=float)
        if self.k > len(X):
            raise ValueError(f"k={self.k} exceeds the {len(X)} training rows")
        self.X_ = X
        self.y_ = np.asarray(y, dtype=int)
        self.n_classes = n_classes
        return self

    def neighbors(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty((len(X), self.k), dtype=int)
        for start in range(0, len(X), self.chunk):
            block = X[start : start + self.chunk]
            diff = block[:, None, :] - self.X_[None, :, :]
            d2 = np.einsum("ijk,ijk->ij", diff, diff)
            out[start : start + len(block)] = np.argsort(d2, axis=1, kind="stable")[:, : self.k]
        return out

    def predict(self, X) -> np.ndarray:
        nb = self.neighbors(X)
        votes = np.zeros((len(nb), self.n_classes), dtype=int)
        for j in range(self.k):
            np.add.at(votes, (np.arange(len(nb)), self.y_[nb[:, j]]), 1)
        return np.argmax(votes, axis=1)

    def to_dict(self) -> dict:
        return {"k": self.k, "n_classes": self.n_classes, "X": self.X_.tolist(), "y": self.y_.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "NearestNeighbors":
        m = cls(d["k"])
        m.n_classes = d["n_classes"]
        m.X_ = np.array(d["X"], dtype=float).reshape(len(d["y"]), -1)
        m.y_ = np.array(d["y"], dtype=int)
        return m
