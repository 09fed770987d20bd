"""Second-order biased random walks over an undirected policy graph."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .alias import build_alias
from .rng import next_below, next_float, split


@dataclass(frozen=True)
class WalkConfig:
    p: float = 1.0
    q: float = 0.5
    walk_length: int = 40
    walks_per_node: int = 10
    seed: int = 42

    def __post_init__(self):
        if not (self.p > 0 and self.q > 0):
            raise ValueError("p and q must be positive")
        if self.walk_length < 2:
            raise ValueError("walk_length must be at least 2")
        if self.walks_per_node < 1:
            raise ValueError("walks_per_node must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")


@numba.njit(cache=True)
def _contains(indices, lo, hi, x):
    # neighbour lists are sorted
    while lo < hi:
        mid = (lo + hi) // 2
        v = indices[mid]
        if v == x:
            return True
        if v < x:
            lo = mid + 1
        else:
            hi = mid
    return False


@numba.njit(cache=True)
def _bias_weights(indptr, indices, prev, cur, inv_p, inv_q, out):
    lo_p, hi_p = indptr[prev], indptr[prev + 1]
    base = indptr[cur]
    for k in range(indptr[cur + 1] - base):
        x = indices[base + k]
        if x == prev:
            out[k] = inv_p
        elif _contains(indices, lo_p, hi_p, x):
            out[k] = 1.0
        else:
            out[k] = inv_q


@numba.njit(cache=True)
def _build_tables(indptr, indices, inv_p, inv_q):
    n_dir = indices.shape[0]
    offsets = np.zeros(n_dir + 1, dtype=np.int64)
    for e in range(n_dir):
        v = indices[e]
        offsets[e + 1] = offsets[e] + indptr[v + 1] - indptr[v]
    prob = np.zeros(offsets[n_dir])
    alias = np.zeros(offsets[n_dir], dtype=np.int64)
    n = indptr.shape[0] - 1
    for t in range(n):
        for e in range(indptr[t], indptr[t + 1]):
            v = indices[e]
            deg = indptr[v + 1] - indptr[v]
            w = np.empty(deg)
            _bias_weights(indptr, indices, t, v, inv_p, inv_q, w)
            build_alias(w, prob[offsets[e]:offsets[e + 1]], alias[offsets[e]:offsets[e + 1]])
    return offsets, prob, alias


@dataclass(frozen=True)
class TransitionTables:
    """Alias tables for every directed adjacency pair ``prev -> cur``.

    The table for the pair stored at CSR position ``e`` (``indices[e] == cur``
    inside ``prev``'s row) lives at ``prob[offsets[e]:offsets[e + 1]]`` and is
    indexed like ``cur``'s neighbour list.
    """

    indptr: np.ndarray
    indices: np.ndarray
    offsets: np.ndarray
    prob: np.ndarray
    alias: np.ndarray
    p: float
    q: float

    def _edge(self, prev, cur):
        row = self.indices[self.indptr[prev]:self.indptr[prev + 1]]
        k = np.searchsorted(row, cur)
        if k >= len(row) or row[k] != cur:
            raise KeyError(f"{prev} and {cur} are not adjacent")
        return int(self.indptr[prev] + k)

    def weights(self, prev: int, cur: int) -> dict[int, float]:
        """Unnormalised bias weights for stepping out of ``cur`` having come from ``prev``."""
        self._edge(prev, cur)
        nbrs = self.indices[self.indptr[cur]:self.indptr[cur + 1]]
        w = np.empty(len(nbrs))
        _bias_weights(self.indptr, self.indices, prev, cur, 1.0 / self.p, 1.0 / self.q, w)
        return {int(x): float(wx) for x, wx in zip(nbrs, w)}

    def probabilities(self, prev: int, cur: int) -> dict[int, float]:
        """Next-step distribution encoded by the stored alias table."""
        e = self._edge(prev, cur)
        lo, hi = self.offsets[e], self.offsets[e + 1]
        pr, al = self.prob[lo:hi], self.alias[lo:hi]
        n = hi - lo
        out = pr / n
        np.add.at(out, al, (1.0 - pr) / n)
        nbrs = self.indices[self.indptr[cur]:self.indptr[cur + 1]]
        return {int(x): float(px) for x, px in zip(nbrs, out)}


def precompute_transition_tables(view, cfg: WalkConfig) -> TransitionTables:
    if view.node_count == 0:
        raise ValueError("graph is empty")
    offsets, prob, alias = _build_tables(view.indptr, view.indices, 1.0 / cfg.p, 1.0 / cfg.q)
    return TransitionTables(view.indptr, view.indices, offsets, prob, alias, cfg.p, cfg.q)


@numba.njit(cache=True)
def _walk(indptr, indices, offsets, prob, alias, start, length, state, out):
    out[0] = start
    deg = indptr[start + 1] - indptr[start]
    if deg == 0:
        return 1
    # first hop is uniform over neighbours
    e = indptr[start] + next_below(state, deg)
    out[1] = indices[e]
    steps = 2
    while steps < length:
        cur = indices[e]
        deg = indptr[cur + 1] - indptr[cur]
        if deg == 0:
            break
        k = next_below(state, deg)
        if next_float(state) >= prob[offsets[e] + k]:
            k = alias[offsets[e] + k]
        e = indptr[cur] + k
        out[steps] = indices[e]
        steps += 1
    return steps


@numba.njit(cache=True)
def _generate(indptr, indices, offsets, prob, alias, walk_length, walks_per_node, seed):
    n = indptr.shape[0] - 1
    paths = np.full((n * walks_per_node, walk_length), -1, dtype=np.int64)
    lengths = np.zeros(n * walks_per_node, dtype=np.int64)
    state = np.zeros(1, dtype=np.uint64)
    for w in range(walks_per_node):
        for v in range(n):
            row = w * n + v
            state[0] = split(seed, v, w)
            lengths[row] = _walk(indptr, indices, offsets, prob, alias, v, walk_length, state, paths[row])
    return paths, lengths


@dataclass(frozen=True)
class WalkCorpus:
    """Walks stored as a ``-1``-padded matrix plus per-walk lengths."""

    paths: np.ndarray
    lengths: np.ndarray

    def __len__(self):
        return len(self.lengths)

    def __iter__(self):
        for row, n in zip(self.paths, self.lengths):
            yield [int(x) for x in row[:n]]

    def __getitem__(self, i):
        return [int(x) for x in self.paths[i, : self.lengths[i]]]


def generate_walks(view, cfg: WalkConfig, tables: TransitionTables | None = None) -> WalkCorpus:
    """``walks_per_node`` walks from every node, walk ``w`` of node ``v`` at row ``w * n + v``.

    Isolated nodes yield length-1 walks; walks stop early at dead ends.
    """
    if view.node_count == 0:
        return WalkCorpus(np.zeros((0, cfg.walk_length), dtype=np.int64), np.zeros(0, dtype=np.int64))
    if tables is None:
        tables = precompute_transition_tables(view, cfg)
    paths, lengths = _generate(
        tables.indptr, tables.indices, tables.offsets, tables.prob, tables.alias,
        cfg.walk_length, cfg.walks_per_node, np.uint64(cfg.seed),
    )
    return WalkCorpus(paths, lengths)
