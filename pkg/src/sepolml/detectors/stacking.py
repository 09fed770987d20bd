"""Stacked ensemble: RF/SVM/MLP out-of-fold predictions feed a softmax regression."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from ..dataset import N_LABELS
from .base import TrainedModel, one_hot
from .forest import ForestConfig, RandomForest, train_random_forest
from .mlp import MLP, MLPConfig, softmax, train_mlp
from .split import stratified_folds
from .svm import LinearSVM, SVMConfig, train_svm


@dataclass(frozen=True)
class MetaConfig:
    l2: float = 1e-2
    max_iter: int = 500


@dataclass(frozen=True)
class StackingConfig:
    forest: ForestConfig = field(default_factory=ForestConfig)
    svm: SVMConfig = field(default_factory=SVMConfig)
    mlp: MLPConfig = field(default_factory=MLPConfig)
    meta: MetaConfig = field(default_factory=MetaConfig)
    folds: int = 5
    seed: int = 42


def _train_bases(X, y, cfg: StackingConfig):
    return [
        train_random_forest(X, y, cfg.forest),
        train_svm(X, y, cfg.svm),
        train_mlp(X, y, cfg.mlp),
    ]


def _meta_features(bases, X) -> np.ndarray:
    return np.hstack([one_hot(b.predict(X)) for b in bases])


def fit_softmax_regression(F, y, cfg: MetaConfig) -> np.ndarray:
    """Multinomial logistic regression weights ``(F.shape[1] + 1, 11)``, bias row last."""
    A = np.hstack([F, np.ones((len(F), 1))])
    T = one_hot(y)
    n, d = A.shape

    def objective(w):
        W = w.reshape(d, N_LABELS)
        P = softmax(A @ W)
        loss = -np.sum(T * np.log(np.clip(P, 1e-300, None))) / n + 0.5 * cfg.l2 * np.sum(W[:-1] ** 2)
        G = A.T @ (P - T) / n
        G[:-1] += cfg.l2 * W[:-1]
        return loss, G.ravel()

    res = minimize(objective, np.zeros(d * N_LABELS), jac=True, method="L-BFGS-B",
                   options={"maxiter": cfg.max_iter})
    return res.x.reshape(d, N_LABELS)


class StackingEnsemble(TrainedModel):
    kind = "stacking"

    def __init__(self, bases, meta_weights, label_set, training_seed, config: StackingConfig):
        super().__init__(bases[0].feature_dimension, label_set, training_seed)
        self.bases = list(bases)
        self.meta_weights = np.asarray(meta_weights, dtype=np.float64)
        self.config = config

    def _scores(self, X):
        F = _meta_features(self.bases, X)
        return softmax(np.hstack([F, np.ones((len(F), 1))]) @ self.meta_weights)

    def to_dict(self):
        return {
            **self._header(),
            "bases": [b.to_dict() for b in self.bases],
            "meta_weights": self.meta_weights.tolist(),
            "config": {
                "folds": self.config.folds,
                "seed": self.config.seed,
                "meta": {**self.config.meta.__dict__},
            },
        }

    @classmethod
    def from_dict(cls, d):
        bases = [
            RandomForest.from_dict(d["bases"][0]),
            LinearSVM.from_dict(d["bases"][1]),
            MLP.from_dict(d["bases"][2]),
        ]
        c = d["config"]
        cfg = StackingConfig(
            bases[0].config, bases[1].config, bases[2].config, MetaConfig(**c["meta"]), c["folds"], c["seed"]
        )
        return cls(bases, d["meta_weights"], d["label_set"], d["training_seed"], cfg)


def train_stacking(X, y, cfg: StackingConfig = StackingConfig()) -> StackingEnsemble:
    """5-fold out-of-fold one-hot base predictions (33 columns) train the meta learner;
    the bases are then refit on all of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    folds = stratified_folds(y, cfg.folds, cfg.seed)
    oof = np.zeros((len(X), 3 * N_LABELS))
    for k in range(cfg.folds):
        held = folds == k
        if not held.any():
            continue
        bases = _train_bases(X[~held], y[~held], cfg)
        oof[held] = _meta_features(bases, X[held])
    meta = fit_softmax_regression(oof, y, cfg.meta)
    bases = _train_bases(X, y, cfg)
    return StackingEnsemble(bases, meta, np.unique(y), cfg.seed, cfg)
