"""CART trees with Gini splits and a bootstrap-aggregated forest.

Labels are integer class indices. Classes are ordered lexicographically by
the caller, so "smallest index" doubles as the lexicographic tie rule.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np


def _best_split(x: np.ndarray, y: np.ndarray, n_classes: int, min_leaf: int):
    """Best Gini split along one feature: ``(impurity, threshold)`` or None."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    m = len(xs)
    # candidate cut i sends xs[:i] left; needs a strict value change
    cuts = np.flatnonzero(xs[1:] > xs[:-1]) + 1
    cuts = cuts[(cuts >= min_leaf) & (m - cuts >= min_leaf)]
    if cuts.size == 0:
        return None
    onehot = np.zeros((m, n_classes))
    onehot[np.arange(m), ys] = 1.0
    left = np.cumsum(onehot, axis=0)[cuts - 1]
    total = onehot.sum(axis=0)
    right = total - left
    n_left = cuts.astype(float)
    n_right = m - n_left
    gini_left = 1.0 - np.sum(left**2, axis=1) / n_left**2
    gini_right = 1.0 - np.sum(right**2, axis=1) / n_right**2
    weighted = (n_left * gini_left + n_right * gini_right) / m
    k = int(np.argmin(weighted))
    lo, hi = xs[cuts[k] - 1], xs[cuts[k]]
    thr = lo + (hi - lo) / 2.0
    if not lo <= thr < hi:
        thr = lo
    return float(weighted[k]), float(thr)


class DecisionTree:
    """Unpruned CART classifier grown depth-first from an explicit stack."""

    def __init__(self, max_features: int | None = None, max_depth: int | None = None, min_leaf: int = 1):
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int, rng: np.random.Generator):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        n_features = X.shape[1]
        mtry = n_features if self.max_features is None else min(self.max_features, n_features)
        feature, threshold, left, right, counts = [], [], [], [], []

        def new_node(idx):
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            counts.append(np.bincount(y[idx], minlength=n_classes))
            return len(feature) - 1

        stack = [(new_node(np.arange(len(y))), np.arange(len(y)), 0)]
        while stack:
            node, idx, depth = stack.pop()
            if np.count_nonzero(counts[node]) <= 1:
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            if len(idx) < 2 * self.min_leaf:
                continue
            perm = rng.permutation(n_features)
            best = None
            # first mtry features are the sample; the rest are only a fallback
            # when none of the sampled ones can split this node
            for rank, f in enumerate(perm):
                if rank >= mtry and best is not None:
                    break
                found = _best_split(X[idx, f], y[idx], n_classes, self.min_leaf)
                if found is not None and (best is None or found[0] < best[0]):
                    best = (found[0], found[1], int(f))
            if best is None:
                continue
            _, thr, f = best
            go_left = X[idx, f] <= thr
            li, ri = idx[go_left], idx[~go_left]
            feature[node], threshold[node] = f, thr
            left[node] = new_node(li)
            right[node] = new_node(ri)
            stack.append((right[node], ri, depth + 1))
            stack.append((left[node], li, depth + 1))

        self.feature_ = np.array(feature, dtype=int)
        self.threshold_ = np.array(threshold, dtype=float)
        self.left_ = np.array(left, dtype=int)
        self.right_ = np.array(right, dtype=int)
        self.value_ = np.array(counts, dtype=int).reshape(len(feature), n_classes)
        return self

    @property
    def n_nodes(self) -> int:
        return len(self.feature_)

    def apply(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=int)
        active = np.flatnonzero(self.feature_[node] >= 0)
        while active.size:
            f = self.feature_[node[active]]
            go_left = X[active, f] <= self.threshold_[node[active]]
            node[active] = np.where(go_left, self.left_[node[active]], self.right_[node[active]])
            active = active[self.feature_[node[active]] >= 0]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.value_[self.apply(X)], axis=1)

    def to_dict(self) -> dict:
        return {
            "feature": self.feature_.tolist(),
            "threshold": self.threshold_.tolist(),
            "left": self.left_.tolist(),
            "right": self.right_.tolist(),
            "value": self.value_.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        t = cls()
        t.feature_ = np.array(d["feature"], dtype=int)
        t.threshold_ = np.array(d["threshold"], dtype=float)
        t.left_ = np.array(d["left"], dtype=int)
        t.right_ = np.array(d["right"], dtype=int)
        t.value_ = np.array(d["value"], dtype=int).reshape(len(t.feature_), -1)
        return t


class RandomForest:
    """Majority vote over bootstrap-trained trees.

    Tree ``i`` draws its bootstrap sample and feature subsets from a generator
    seeded with ``(seed, i)``, so the forest does not depend on ``n_jobs``.
    """

    def __init__(
        self, n_trees=8, max_features=None, max_depth=None, min_leaf=1, bootstrap=True, seed=0, n_jobs=1
    ):
        self.n_trees = n_trees
        self.bootstrap = bootstrap
        self.max_features = max_features
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.seed = seed
        self.n_jobs = n_jobs

    def _grow(self, i: int, X, y, n_classes):
        rng = np.random.default_rng([self.seed, i])
        tree = DecisionTree(self.max_features, self.max_depth, self.min_leaf)
        if not self.bootstrap:
            return tree.fit(X, y, n_classes, rng)
        boot = rng.integers(0, len(y), size=len(y))
        return tree.fit(X[boot], y[boot], n_classes, rng)

    def fit(self, X, y, n_classes: int):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=int)
        self.n_classes = n_classes
        if self.n_jobs > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                self.trees_ = list(pool.map(lambda i: self._grow(i, X, y, n_classes), range(self.n_trees)))
        else:
            self.trees_ = [self._grow(i, X, y, n_classes) for i in range(self.n_trees)]
        return self

    def votes(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        votes = np.zeros((len(X), self.n_classes), dtype=int)
        rows = np.arange(len(X))
        for tree in self.trees_:
            np.add.at(votes, (rows, tree.predict(X)), 1)
        return votes

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.votes(X), axis=1)

    def to_dict(self) -> dict:
        return {"n_classes": self.n_classes, "trees": [t.to_dict() for t in self.trees_]}

    @classmethod
    def from_dict(cls, d: dict) -> "RandomForest":
        rf = cls(n_trees=len(d["trees"]))
        rf.n_classes = d["n_classes"]
        rf.trees_ = [DecisionTree.from_dict(t) for t in d["trees"]]
        return rf
