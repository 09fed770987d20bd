"""Skip-gram with negative sampling over walk corpora."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from ..errors import DataError
from .rng import next_float, split

MIN_LR_FRACTION = 1e-4


class DegenerateCorpus(DataError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    dimensions: int = 64
    window: int = 5
    negative_samples: int = 5
    epochs: int = 5
    initial_learning_rate: float = 0.025
    seed: int = 42

    def __post_init__(self):
        if self.dimensions < 2:
            raise ValueError("dimensions must be at least 2")
        if self.window < 1 or self.negative_samples < 1 or self.epochs < 1:
            raise ValueError("window, negative_samples and epochs must be positive")
        if not self.initial_learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@numba.njit(cache=True)
def count_pairs(lengths, window):
    total = 0
    for n in lengths:
        for i in range(n):
            lo = max(0, i - window)
            hi = min(n, i + window + 1)
            total += hi - lo - 1
    return total


@numba.njit(cache=True)
def _draw(cdf, state):
    u = next_float(state) * cdf[-1]
    lo, hi = 0, cdf.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@numba.njit(cache=True)
def _sigmoid(x):
    if x > 30.0:
        return 1.0
    if x < -30.0:
        return 0.0
    return 1.0 / (1.0 + np.exp(-x))


@numba.njit(cache=True)
def _train(paths, lengths, node_count, dims, window, negatives, epochs, lr0, seed, noise_cdf):
    state = np.zeros(1, dtype=np.uint64)
    state[0] = split(seed, 0, 0)
    w_in = np.empty((node_count, dims))
    for i in range(node_count):
        for k in range(dims):
            w_in[i, k] = (next_float(state) - 0.5) / dims
    w_out = np.zeros((node_count, dims))
    grad = np.empty(dims)

    total = count_pairs(lengths, window) * epochs
    done = 0
    state[0] = split(seed, 1, 0)
    for _ in range(epochs):
        for r in range(lengths.shape[0]):
            n = lengths[r]
            for i in range(n):
                u = paths[r, i]
                lo = max(0, i - window)
                hi = min(n, i + window + 1)
                for j in range(lo, hi):
                    if j == i:
                        continue
                    lr = lr0 * max(MIN_LR_FRACTION, 1.0 - done / total)
                    done += 1
                    for k in range(dims):
                        grad[k] = 0.0
                    for s in range(negatives + 1):
                        if s == 0:
                            v = paths[r, j]
                            label = 1.0
                        else:
                            v = _draw(noise_cdf, state)
                            if v == paths[r, j]:
                                continue
                            label = 0.0
                        dot = 0.0
                        for k in range(dims):
                            dot += w_in[u, k] * w_out[v, k]
                        g = lr * (label - _sigmoid(dot))
                        for k in range(dims):
                            grad[k] += g * w_out[v, k]
                            w_out[v, k] += g * w_in[u, k]
                    for k in range(dims):
                        w_in[u, k] += grad[k]
    return w_in


def noise_distribution(corpus, node_count: int) -> np.ndarray:
    """Cumulative unigram^(3/4) weights over nodes seen in the walks."""
    counts = np.zeros(node_count)
    mask = corpus.paths >= 0
    np.add.at(counts, corpus.paths[mask], 1.0)
    return np.cumsum(counts**0.75)


def train_skipgram(corpus, node_count: int, cfg: TrainConfig) -> np.ndarray:
    """Input-vector matrix of shape ``(node_count, cfg.dimensions)``.

    Gradient for a pair ``(u, v, label)``: ``g = lr * (label - sigmoid(in_u . out_v))``;
    ``out_v += g * in_u`` per sample, ``in_u`` receives the summed ``g * out_v``
    after the positive and its negatives, as in word2vec.
    """
    if count_pairs(corpus.lengths, cfg.window) == 0:
        raise DegenerateCorpus("walk corpus contains no (center, context) pairs")
    cdf = noise_distribution(corpus, node_count)
    return _train(
        corpus.paths, corpus.lengths, node_count, cfg.dimensions, cfg.window,
        cfg.negative_samples, cfg.epochs, cfg.initial_learning_rate, np.uint64(cfg.seed), cdf,
    )
