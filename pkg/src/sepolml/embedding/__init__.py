"""Node2vec embeddings: biased walks + skip-gram with negative sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DataError, InvariantViolation
from ..graph import PolicyGraph, UndirectedView, undirected_view
from .alias import AliasTable
from .skipgram import DegenerateCorpus, TrainConfig, train_skipgram
from .walks import (
    TransitionTables,
    WalkConfig,
    WalkCorpus,
    generate_walks,
    precompute_transition_tables,
)

__all__ = [
    "AliasTable", "DegenerateCorpus", "EmbeddingTable", "TrainConfig", "TransitionTables",
    "WalkConfig", "WalkCorpus", "ZeroVector", "cosine_similarity", "embed",
    "generate_walks", "load_embeddings", "precompute_transition_tables", "save_embeddings",
    "train_skipgram",
]


class ZeroVector(DataError):
    pass


@dataclass
class EmbeddingTable:
    keys: list[str]
    vectors: np.ndarray
    seed: int = 0
    _index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.shape[0] != len(self.keys):
            raise ValueError("one vector per key required")
        if not np.isfinite(self.vectors).all():
            raise InvariantViolation("embedding contains non-finite values")
        self._index = {k: i for i, k in enumerate(self.keys)}

    @property
    def node_count(self) -> int:
        return len(self.keys)

    @property
    def dimensions(self) -> int:
        return self.vectors.shape[1]

    def __contains__(self, key):
        return key in self._index

    def __getitem__(self, key) -> np.ndarray:
        return self.vectors[self._index[key]]

    def header(self) -> str:
        return f"node2vec {self.node_count} {self.dimensions} {self.seed}"


def embed(g: PolicyGraph | UndirectedView, wcfg: WalkConfig, tcfg: TrainConfig) -> EmbeddingTable:
    if isinstance(g, PolicyGraph):
        view = undirected_view(g)
        keys = [n.key for n in g.nodes]
    else:
        view = g
        keys = [str(i) for i in range(view.node_count)]
    if view.node_count == 0:
        return EmbeddingTable([], np.zeros((0, tcfg.dimensions)), tcfg.seed)
    corpus = generate_walks(view, wcfg)
    vectors = train_skipgram(corpus, view.node_count, tcfg)
    return EmbeddingTable(keys, vectors, tcfg.seed)


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ZeroVector("cosine similarity of a zero vector is undefined")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def save_embeddings(table: EmbeddingTable, path) -> None:
    """Text format; 9 significant digits per value, so a reload is close but not bitwise."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(table.header() + "\n")
        for key, vec in zip(table.keys, table.vectors):
            fh.write(key + " " + " ".join(f"{x:.9g}" for x in vec) + "\n")


def load_embeddings(path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "node2vec":
            raise DataError(f"{path}: not a node2vec embedding file")
        n, d, seed = int(header[1]), int(header[2]), int(header[3])
        keys, rows = [], []
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if len(parts) != d + 1:
                raise DataError(f"{path}:{lineno}: expected {d} values")
            keys.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(keys) != n:
        raise DataError(f"{path}: header says {n} nodes, found {len(keys)}")
    return EmbeddingTable(keys, np.array(rows).reshape(n, d), seed)
