"""One-hidden-layer perceptron trained by per-sample backpropagation.

Logistic hidden units, softmax output, cross-entropy loss. The per-sample
update loop is compiled with numba; :func:`loss_and_grad` is the plain numpy
reference the loop is checked against.
"""
from __future__ import annotations

import numba
import numpy as np
from scipy.special import expit, log_softmax

from ..errors import NonFiniteLoss


def init_params(n_in: int, n_hidden: int, n_out: int, rng: np.random.Generator) -> dict:
    return {
        "W1": rng.uniform(-0.5, 0.5, size=(n_hidden, n_in)),
        "b1": rng.uniform(-0.5, 0.5, size=n_hidden),
        "W2": rng.uniform(-0.5, 0.5, size=(n_out, n_hidden)),
        "b2": rng.uniform(-0.5, 0.5, size=n_out),
    }


def forward(params: dict, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hidden activations and output log-probabilities."""
    H = expit(X @ params["W1"].T + params["b1"])
    return H, log_softmax(H @ params["W2"].T + params["b2"], axis=1)


def loss(params: dict, X: np.ndarray, y: np.ndarray) -> float:
    _, logp = forward(params, X)
    return float(-np.mean(logp[np.arange(len(y)), y]))


def loss_and_grad(params: dict, X: np.ndarray, y: np.ndarray) -> tuple[float, dict]:
    """Mean cross-entropy over the batch and its gradient by backpropagation."""
    n = len(y)
    H, logp = forward(params, X)
    delta_out = np.exp(logp)
    delta_out[np.arange(n), y] -= 1.0
    delta_out /= n
    delta_hidden = (delta_out @ params["W2"]) * H * (1.0 - H)
    grads = {
        "W2": delta_out.T @ H,
        "b2": delta_out.sum(axis=0),
        "W1": delta_hidden.T @ X,
        "b1": delta_hidden.sum(axis=0),
    }
    return float(-np.mean(logp[np.arange(n), y])), grads


@numba.njit(cache=True)
def _sgd_epochs(W1, b1, W2, b2, X, y, orders, lr):
    n_hidden = W1.shape[0]
    n_in = W1.shape[1]
    n_out = W2.shape[0]
    h = np.empty(n_hidden)
    z = np.empty(n_out)
    d_out = np.empty(n_out)
    d_hid = np.empty(n_hidden)
    epoch_loss = np.empty(orders.shape[0])
    for e in range(orders.shape[0]):
        total = 0.0
        for t in range(orders.shape[1]):
            i = orders[e, t]
            for j in range(n_hidden):
                a = b1[j]
                for k in range(n_in):
                    a += W1[j, k] * X[i, k]
                h[j] = 1.0 / (1.0 + np.exp(-a))
            zmax = -np.inf
            for c in range(n_out):
                a = b2[c]
                for j in range(n_hidden):
                    a += W2[c, j] * h[j]
                z[c] = a
                if a > zmax:
                    zmax = a
            s = 0.0
            for c in range(n_out):
                s += np.exp(z[c] - zmax)
            lse = zmax + np.log(s)
            total += lse - z[y[i]]
            for c in range(n_out):
                d_out[c] = np.exp(z[c] - lse)
            d_out[y[i]] -= 1.0
            for j in range(n_hidden):
                g = 0.0
                for c in range(n_out):
                    g += d_out[c] * W2[c, j]
                d_hid[j] = g * h[j] * (1.0 - h[j])
            for c in range(n_out):
                for j in range(n_hidden):
                    W2[c, j] -= lr * d_out[c] * h[j]
                b2[c] -= lr * d_out[c]
            for j in range(n_hidden):
                for k in range(n_in):
                    W1[j, k] -= lr * d_hid[j] * X[i, k]
                b1[j] -= lr * d_hid[j]
        epoch_loss[e] = total / orders.shape[1]
        if not np.isfinite(epoch_loss[e]):
            return epoch_loss[: e + 1]
    return epoch_loss


def sgd_orders(n: int, epochs: int, seed: int) -> np.ndarray:
    """Visiting order for every epoch; epoch ``e`` uses generator ``(seed, e)``."""
    return np.array([np.random.default_rng([seed, e]).permutation(n) for e in range(epochs)], dtype=np.int64).reshape(
        epochs, n
    )


class MultilayerPerceptron:
    def __init__(self, hidden_size: int = 10, learning_rate: float = 0.01, epochs: int = 500, seed: int = 0):
        if hidden_size < 1:
            raise ValueError("hidden_size must be at least 1")
        self.hidden_size = hidden_size
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y, n_classes: int):
        X = np.ascontiguousarray(X, dtype=float)
        y = np.ascontiguousarray(y, dtype=np.int64)
        self.n_classes = n_classes
        self.params_ = init_params(X.shape[1], self.hidden_size, n_classes, np.random.default_rng(self.seed))
        p = self.params_
        self.loss_curve_ = _sgd_epochs(
            p["W1"], p["b1"], p["W2"], p["b2"], X, y, sgd_orders(len(y), self.epochs, self.seed), self.learning_rate
        )
        if not np.all(np.isfinite(self.loss_curve_)) or not all(np.all(np.isfinite(v)) for v in p.values()):
            raise NonFiniteLoss(
                f"training loss diverged (learning rate {self.learning_rate} too high for the input scale)"
            )
        return self

    def predict_proba(self, X) -> np.ndarray:
        return np.exp(forward(self.params_, np.asarray(X, dtype=float))[1])

    def predict(self, X) -> np.ndarray:
        return np.argmax(forward(self.params_, np.asarray(X, dtype=float))[1], axis=1)

    def to_dict(self) -> dict:
        return {
            "hidden_size": self.hidden_size,
            "n_classes": self.n_classes,
            "params": {k: v.tolist() for k, v in self.params_.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MultilayerPerceptron":
        m = cls(d["hidden_size"])
        m.n_classes = d["n_classes"]
        m.params_ = {k: np.array(v, dtype=float) for k, v in d["params"].items()}
        return m
