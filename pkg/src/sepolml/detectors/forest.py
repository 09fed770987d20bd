"""Random forest of Gini decision trees."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..dataset import N_LABELS
from .base import TrainedModel, check_degenerate

_EPS = 1e-12


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 100
    max_depth: int | None = None
    min_leaf: int = 1
    features_per_split: int | None = None  # default ceil(sqrt(dim))
    seed: int = 42


class DecisionTree:
    """Flat-array binary tree; leaves have ``feature == -1``."""

    def __init__(self, feature, threshold, left, right, value):
        self.feature = np.asarray(feature, dtype=np.int64)
        self.threshold = np.asarray(threshold, dtype=np.float64)
        self.left = np.asarray(left, dtype=np.int64)
        self.right = np.asarray(right, dtype=np.int64)
        self.value = np.asarray(value, dtype=np.int64)

    def __len__(self):
        return len(self.feature)

    def apply(self, X) -> np.ndarray:
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] >= 0
        while active.any():
            rows = np.flatnonzero(active)
            n = node[rows]
            go_left = X[rows, self.feature[n]] <= self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])
            active = self.feature[node] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_record(self, i=0) -> dict:
        if self.feature[i] < 0:
            return {"leaf": int(self.value[i])}
        return {
            "feature": int(self.feature[i]),
            "threshold": float(self.threshold[i]),
            "left": self.to_record(self.left[i]),
            "right": self.to_record(self.right[i]),
        }

    @classmethod
    def from_record(cls, rec) -> "DecisionTree":
        feature, threshold, left, right, value = [], [], [], [], []

        def visit(r):
            i = len(feature)
            feature.append(-1)
            threshold.append(0.0)
            left.append(-1)
            right.append(-1)
            value.append(-1)
            if "leaf" in r:
                value[i] = r["leaf"]
            else:
                feature[i] = r["feature"]
                threshold[i] = r["threshold"]
                left[i] = visit(r["left"])
                right[i] = visit(r["right"])
            return i

        visit(rec)
        return cls(feature, threshold, left, right, value)


def gini(counts) -> float:
    n = counts.sum()
    if n == 0:
        return 0.0
    p = counts / n
    return 1.0 - float(p @ p)


def _majority(y) -> int:
    # bincount + argmax: ties go to the lowest label
    return int(np.argmax(np.bincount(y, minlength=N_LABELS)))


def best_split_on_feature(x, y, parent_gini, min_leaf):
    """(gain, threshold) of the best Gini split on one column, or None.

    Thresholds are midpoints between consecutive distinct values; equal gains
    keep the lowest threshold.
    """
    n = len(x)
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    onehot = np.zeros((n, N_LABELS))
    onehot[np.arange(n), ys] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]  # left counts for split after position k
    right = left[-1] + onehot[-1] - left
    k = np.arange(1, n)
    valid = (xs[1:] > xs[:-1]) & (k >= min_leaf) & (n - k >= min_leaf)
    if not valid.any():
        return None
    gl = 1.0 - ((left / k[:, None]) ** 2).sum(axis=1)
    gr = 1.0 - ((right / (n - k)[:, None]) ** 2).sum(axis=1)
    gain = parent_gini - (k * gl + (n - k) * gr) / n
    gain[~valid] = -np.inf
    j = int(np.argmax(gain))
    return float(gain[j]), float((xs[j] + xs[j + 1]) / 2.0)


def grow_tree(X, y, rng: np.random.Generator, features_per_split: int, max_depth=None, min_leaf=1) -> DecisionTree:
    dim = X.shape[1]
    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-1)
        return len(feature) - 1

    root = new_node()
    stack = [(root, np.arange(len(y)), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        value[node] = _majority(ys)
        if len(np.unique(ys)) == 1 or len(idx) < 2 * min_leaf:
            continue
        if max_depth is not None and depth >= max_depth:
            continue
        parent = gini(np.bincount(ys, minlength=N_LABELS).astype(float))
        order = rng.permutation(dim)
        candidates = np.sort(order[:features_per_split])
        rest = order[features_per_split:]
        best = None
        while True:
            for f in candidates:
                found = best_split_on_feature(X[idx, f], ys, parent, min_leaf)
                if found is None:
                    continue
                gain, thr = found
                # strict improvement only: equal gains keep the lower feature index
                if best is None or gain > best[0] + _EPS:
                    best = (gain, int(f), thr)
            # like common implementations, keep drawing if every candidate was constant
            if best is not None or len(rest) == 0:
                break
            candidates, rest = np.sort(rest[:features_per_split]), rest[features_per_split:]
        if best is None:
            continue
        _, f, thr = best
        mask = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node], right[node] = new_node(), new_node()
        # push right first so the left subtree is numbered first
        stack.append((right[node], idx[~mask], depth + 1))
        stack.append((left[node], idx[mask], depth + 1))
    return DecisionTree(feature, threshold, left, right, value)


class RandomForest(TrainedModel):
    kind = "random_forest"

    def __init__(self, trees, feature_dimension, label_set, training_seed, config: ForestConfig):
        super().__init__(feature_dimension, label_set, training_seed)
        self.trees = list(trees)
        self.config = config

    def tree_votes(self, X) -> np.ndarray:
        """``(n_trees, n)`` matrix of per-tree predictions."""
        X = self._check(X)
        return np.stack([t.predict(X) for t in self.trees])

    def _scores(self, X):
        votes = np.stack([t.predict(X) for t in self.trees])
        counts = np.zeros((X.shape[0], N_LABELS))
        for row in votes:
            counts[np.arange(X.shape[0]), row] += 1
        return counts / len(self.trees)

    def to_dict(self):
        return {
            **self._header(),
            "config": {**self.config.__dict__},
            "trees": [t.to_record() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d):
        m = cls(
            [DecisionTree.from_record(r) for r in d["trees"]],
            d["feature_dimension"], d["label_set"], d["training_seed"], ForestConfig(**d["config"]),
        )
        m.degenerate = d.get("degenerate", False)
        return m


def train_random_forest(X, y, cfg: ForestConfig = ForestConfig()) -> RandomForest:
    """Bootstrap-bagged Gini trees; prediction is a majority vote, ties to the lowest label."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n, dim = X.shape
    m = cfg.features_per_split or math.ceil(math.sqrt(dim))
    trees = []
    for t in range(cfg.n_trees):
        # one independent stream per tree, so trees can be grown in any order
        rng = np.random.default_rng([cfg.seed, t])
        boot = rng.integers(0, n, size=n)
        trees.append(grow_tree(X[boot], y[boot], rng, m, cfg.max_depth, cfg.min_leaf))
    model = RandomForest(trees, dim, np.unique(y), cfg.seed, cfg)
    model.degenerate = check_degenerate(X, y)
    return model
