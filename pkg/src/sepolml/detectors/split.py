from __future__ import annotations

import numpy as np

from ..dataset import LabeledDataset
from ..errors import DataError


class LabelTooSmall(DataError):
    pass


def stratified_indices(labels, test_fraction: float, seed: int) -> tuple[list[int], list[int]]:
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie strictly between 0 and 1")
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    train, test = [], []
    for lbl in np.unique(labels):
        idx = np.flatnonzero(labels == lbl)
        if len(idx) < 2:
            raise LabelTooSmall(f"label {int(lbl)} has {len(idx)} example(s); need at least 2")
        idx = rng.permutation(idx)
        n_test = min(max(1, int(round(len(idx) * test_fraction))), len(idx) - 1)
        test.extend(idx[:n_test].tolist())
        train.extend(idx[n_test:].tolist())
    return sorted(train), sorted(test)


def stratified_split(ds: LabeledDataset, test_fraction: float = 0.2, seed: int = 42):
    """Per-label shuffled split; each label keeps ``round(n * test_fraction)`` test examples."""
    train, test = stratified_indices(ds.labels, test_fraction, seed)
    return ds.subset(train), ds.subset(test)


def stratified_folds(labels, k: int, seed: int) -> np.ndarray:
    """Fold id per sample; each label is dealt round-robin over a shuffled order."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    folds = np.empty(len(labels), dtype=np.int64)
    offset = 0
    for lbl in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == lbl))
        folds[idx] = (np.arange(len(idx)) + offset) % k
        offset += len(idx)
    return folds
