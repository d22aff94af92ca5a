from __future__ import annotations

from dataclasses import dataclass

import numpy as np

N_ZONES = 4


@dataclass
class Preprocessor:
    """Standardises numeric columns and one-hot encodes the categorical one.

    Statistics come from the training split only. A constant column keeps
    unit scale, so it maps to 0 on the training data.
    """

    numeric_cols: tuple[int, ...]
    categorical_col: int | None = None
    n_categories: int = N_ZONES
    mean: np.ndarray | None = None
    scale: np.ndarray | None = None

    @classmethod
    def for_features(cls, feature_names, categorical=("zone",)) -> "Preprocessor":
        cat = [i for i, n in enumerate(feature_names) if n in categorical]
        if len(cat) > 1:
            raise ValueError("at most one categorical feature is supported")
        num = tuple(i for i, n in enumerate(feature_names) if n not in categorical)
        return cls(num, cat[0] if cat else None)

    @property
    def n_inputs(self) -> int:
        return len(self.numeric_cols) + (0 if self.categorical_col is None else 1)

    def fit(self, X: np.ndarray) -> "Preprocessor":
        num = np.asarray(X, dtype=float)[:, list(self.numeric_cols)]
        self.mean = num.mean(axis=0)
        std = num.std(axis=0)
        self.scale = np.where(std > 0, std, 1.0)
        return self

    def numeric(self, X: np.ndarray) -> np.ndarray:
        num = np.asarray(X, dtype=float)[:, list(self.numeric_cols)]
        return (num - self.mean) / self.scale

    def codes(self, X: np.ndarray) -> np.ndarray | None:
        if self.categorical_col is None:
            return None
        return np.asarray(X, dtype=float)[:, self.categorical_col].astype(int)

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Standardised numerics followed by the one-hot block."""
        num = self.numeric(X)
        codes = self.codes(X)
        if codes is None:
            return num
        onehot = np.zeros((len(codes), self.n_categories))
        ok = (codes >= 0) & (codes < self.n_categories)
        onehot[np.flatnonzero(ok), codes[ok]] = 1.0
        return np.hstack([num, onehot])

    def to_dict(self) -> dict:
        return {
            "numeric_cols": list(self.numeric_cols),
            "categorical_col": self.categorical_col,
            "n_categories": self.n_categories,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Preprocessor":
        return cls(
            tuple(d["numeric_cols"]),
            d["categorical_col"],
            d["n_categories"],
            np.array(d["mean"], dtype=float),
            np.array(d["scale"], dtype=float),
        )
