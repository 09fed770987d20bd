from __future__ import annotations

import logging

import numpy as np

from ..dataset import N_LABELS
from ..errors import DataError, InvariantViolation

log = logging.getLogger(__name__)


class DimensionMismatch(DataError):
    pass


class DegenerateData(DataError):
    """Identical feature vectors carry different labels. Raised only on request."""


class NonFiniteLoss(InvariantViolation):
    pass


def lowest_argmax(scores: np.ndarray) -> np.ndarray:
    """Row-wise argmax; np.argmax already returns the first (lowest) index on ties."""
    return np.argmax(scores, axis=1)


def check_degenerate(X: np.ndarray, y: np.ndarray) -> bool:
    if len(np.unique(y)) < 2:
        return False
    if np.all(X == X[0]):
        log.warning("all feature vectors identical across %d labels", len(np.unique(y)))
        return True
    return False


class Standardizer:
    """Per-column z-scoring; constant columns keep unit scale."""

    def __init__(self, mean, scale):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.scale = np.asarray(scale, dtype=np.float64)

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        scale = X.std(axis=0)
        scale[scale == 0] = 1.0
        return cls(X.mean(axis=0), scale)

    def transform(self, X):
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale

    def inverse_transform(self, Z):
        return np.asarray(Z, dtype=np.float64) * self.scale + self.mean

    def to_dict(self):
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mean"], d["scale"])


class TrainedModel:
    """Common prediction surface.

    Subclasses implement ``_scores`` returning an ``(n, 11)`` array; labels the
    model never saw get ``-inf`` (margins) or 0 (probabilities, votes).
    """

    kind = "base"

    def __init__(self, feature_dimension: int, label_set, training_seed: int):
        self.feature_dimension = int(feature_dimension)
        self.label_set = sorted(int(c) for c in label_set)
        self.training_seed = int(training_seed)
        self.degenerate = False
        # set by the pipeline so persisted models remember their feature space
        self.feature_space: dict | None = None

    def _check(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.feature_dimension:
            raise DimensionMismatch(
                f"{self.kind} model expects {self.feature_dimension} features, got {X.shape[1]}"
            )
        return X

    def predict_scores(self, X) -> np.ndarray:
        return self._scores(self._check(X))

    def predict(self, X) -> np.ndarray:
        return lowest_argmax(self.predict_scores(X))

    def _scores(self, X):
        raise NotImplementedError

    def _header(self) -> dict:
        return {
            "kind": self.kind,
            "feature_dimension": self.feature_dimension,
            "label_set": self.label_set,
            "training_seed": self.training_seed,
            "degenerate": self.degenerate,
        }


def one_hot(y, n=N_LABELS) -> np.ndarray:
    out = np.zeros((len(y), n))
    out[np.arange(len(y)), np.asarray(y, dtype=np.int64)] = 1.0
    return out
