from __future__ import annotations

import numpy as np
from scipy.special import logsumexp


class NaiveBayes:
    """Gaussian likelihoods for numeric inputs, smoothed categorical for one code column.

    Scores are accumulated in log space; priors are training frequencies.
    """

    def __init__(self, laplace_alpha: float = 1.0, variance_floor: float = 1e-9, n_categories: int = 4):
        self.laplace_alpha = laplace_alpha
        self.variance_floor = variance_floor
        self.n_categories = n_categories

    def fit(self, X, codes, y, n_classes: int):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        self.n_classes = n_classes
        counts = np.bincount(y, minlength=n_classes).astype(float)
        self.log_prior_ = np.log(counts / len(y))
        p = X.shape[1]
        self.mean_ = np.zeros((n_classes, p))
        self.var_ = np.ones((n_classes, p))
        for c in range(n_classes):
            rows = X[y == c]
            if len(rows):
                self.mean_[c] = rows.mean(axis=0)
                self.var_[c] = rows.var(axis=0)
        self.var_ = np.maximum(self.var_, self.variance_floor)
        self.log_cat_ = None
        if codes is not None:
            codes = np.asarray(codes, dtype=int)
            table = np.zeros((n_classes, self.n_categories))
            np.add.at(table, (y, codes), 1.0)
            a = self.laplace_alpha
            self.log_cat_ = np.log((table + a) / (counts[:, None] + a * self.n_categories))
        return self

    def joint_log_likelihood(self, X, codes=None) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        jll = np.tile(self.log_prior_, (len(X), 1))
        for c in range(self.n_classes):
            var = self.var_[c]
            jll[:, c] += -0.5 * np.sum(np.log(2.0 * np.pi * var) + (X - self.mean_[c]) ** 2 / var, axis=1)
        if self.log_cat_ is not None and codes is not None:
            # a code outside the known categories carries no evidence
            codes = np.asarray(codes, dtype=int)
            ok = (codes >= 0) & (codes < self.n_categories)
            jll[ok] += self.log_cat_[:, codes[ok]].T
        return jll

    def predict_proba(self, X, codes=None) -> np.ndarray:
        jll = self.joint_log_likelihood(X, codes)
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))

    def predict(self, X, codes=None) -> np.ndarray:
        return np.argmax(self.joint_log_likelihood(X, codes), axis=1)

    def to_dict(self) -> dict:
        return {
            "laplace_alpha": self.laplace_alpha,
            "variance_floor": self.variance_floor,
            "n_categories": self.n_categories,
            "n_classes": self.n_classes,
            "log_prior": self.log_prior_.tolist(),
            "mean": self.mean_.tolist(),
            "var": self.var_.tolist(),
            "log_cat": None if self.log_cat_ is None else self.log_cat_.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NaiveBayes":
        m = cls(d["laplace_alpha"], d["variance_floor"], d["n_categories"])
        m.n_classes = d["n_classes"]
        m.log_prior_ = np.array(d["log_prior"], dtype=float)
        m.mean_ = np.array(d["mean"], dtype=float).reshape(m.n_classes, -1)
        m.var_ = np.array(d["var"], dtype=float).reshape(m.n_classes, -1)
        m.log_cat_ = None if d["log_cat"] is None else np.array(d["log_cat"], dtype=float)
        return m
