"""Walker/Vose alias method for O(1) sampling from a discrete distribution."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np


@numba.njit(cache=True)
def build_alias(weights, prob_out, alias_out):
    """Fill ``prob_out``/``alias_out`` for ``weights`` in O(n).

    Works in place so the same routine serves standalone tables and the
    flattened per-edge tables used by the walker.
    """
    n = weights.shape[0]
    total = 0.0
    for i in range(n):
        total += weights[i]
    scaled = np.empty(n)
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    ns = 0
    nl = 0
    for i in range(n):
        scaled[i] = weights[i] * n / total
        alias_out[i] = i
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        nl -= 1
        g = large[nl]
        prob_out[s] = scaled[s]
        alias_out[s] = g
        scaled[g] = scaled[g] + scaled[s] - 1.0
        if scaled[g] < 1.0:
            small[ns] = g
            ns += 1
        else:
            large[nl] = g
            nl += 1
    # leftovers are 1 up to rounding
    for k in range(nl):
        prob_out[large[k]] = 1.0
    for k in range(ns):
        prob_out[small[k]] = 1.0


@dataclass(frozen=True)
class AliasTable:
    prob: np.ndarray
    alias: np.ndarray

    @classmethod
    def from_weights(cls, weights) -> "AliasTable":
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or len(w) == 0:
            raise ValueError("weights must be a non-empty vector")
        if np.any(w < 0) or not np.isfinite(w).all() or w.sum() <= 0:
            raise ValueError("weights must be finite, non-negative, and not all zero")
        prob = np.zeros(len(w))
        alias = np.zeros(len(w), dtype=np.int64)
        build_alias(w, prob, alias)
        return cls(prob, alias)

    def __len__(self):
        return len(self.prob)

    def probabilities(self) -> np.ndarray:
        """Exact outcome distribution encoded by the table."""
        n = len(self.prob)
        p = self.prob / n
        out = p.copy()
        np.add.at(out, self.alias, (1.0 - self.prob) / n)
        return out

    def sample(self, rng: np.random.Generator, size=None):
        n = len(self.prob)
        i = rng.integers(0, n, size=size)
        u = rng.random(size=size)
        return np.where(u < self.prob[i], i, self.alias[i])
