"""One-vs-rest linear SVM trained with Pegasos-style stochastic subgradient steps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import N_LABELS
from .base import Standardizer, TrainedModel, check_degenerate


@dataclass(frozen=True)
class SVMConfig:
    lam: float = 1e-4
    epochs: int = 50
    seed: int = 42


class LinearSVM(TrainedModel):
    kind = "linear_svm"

    def __init__(self, weights, standardizer: Standardizer, label_set, training_seed, config: SVMConfig):
        super().__init__(len(standardizer.mean), label_set, training_seed)
        # one row per entry of label_set; last column is the bias
        self.weights = np.asarray(weights, dtype=np.float64)
        self.standardizer = standardizer
        self.config = config

    def margins(self, X) -> np.ndarray:
        Z = self.standardizer.transform(X)
        return np.hstack([Z, np.ones((len(Z), 1))]) @ self.weights.T

    def _scores(self, X):
        out = np.full((X.shape[0], N_LABELS), -np.inf)
        if len(self.label_set) == 1:
            out[:, self.label_set[0]] = 0.0
        else:
            out[:, self.label_set] = self.margins(X)
        return out

    def to_dict(self):
        return {
            **self._header(),
            "config": {**self.config.__dict__},
            "weights": self.weights.tolist(),
            "standardizer": self.standardizer.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        m = cls(
            np.array(d["weights"]).reshape(len(d["label_set"]), -1),
            Standardizer.from_dict(d["standardizer"]), d["label_set"], d["training_seed"],
            SVMConfig(**d["config"]),
        )
        m.degenerate = d.get("degenerate", False)
        return m


def train_svm(X, y, cfg: SVMConfig = SVMConfig()) -> LinearSVM:
    """Hinge loss + L2 penalty ``lam``, step ``1 / (lam * t)``.

    All one-vs-rest problems see the same sample order, so they are trained
    side by side; each row of the weight matrix evolves exactly as if its
    binary problem were trained alone.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    std = Standardizer.fit(X)
    Z = np.hstack([std.transform(X), np.ones((len(X), 1))])
    labels = np.unique(y)
    W = np.zeros((len(labels), Z.shape[1]))
    if len(labels) > 1:
        Y = np.where(y[:, None] == labels[None, :], 1.0, -1.0)
        rng = np.random.default_rng(cfg.seed)
        t = 0
        for _ in range(cfg.epochs):
            for i in rng.permutation(len(Z)):
                t += 1
                eta = 1.0 / (cfg.lam * t)
                violated = Y[i] * (W @ Z[i]) < 1.0
                W *= 1.0 - eta * cfg.lam
                W[violated] += eta * Y[i, violated, None] * Z[i]
    model = LinearSVM(W, std, labels, cfg.seed, cfg)
    model.degenerate = check_degenerate(X, y)
    return model
