"""Rule-group feature vectors built from node embeddings.

Per rule: ``[subject ‖ object ‖ class ‖ permission multi-hot]``, where a
type transition uses its executable type as the object and contributes no
permissions. The example vector is the mean over its rules with
``len(rules) / 6`` appended.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import MAX_RULES, LabeledExample
from ..embedding import EmbeddingTable
from ..errors import DataError
from ..graph import CLASS, OBJECT, SUBJECT, PolicyGraph, node_key
from ..parser import AllowRule, Rule
from .base import DimensionMismatch


class MissingNode(DataError):
    def __init__(self, key):
        self.key = key
        super().__init__(f"no embedding for node {key!r}")


def permission_vocabulary(g: PolicyGraph) -> list[str]:
    return sorted({p for n in g.nodes if n.kind == CLASS for p in n.permissions})


@dataclass(frozen=True)
class FeatureSpace:
    vocabulary: tuple[str, ...]
    dimensions: int
    embedding_header: str = ""

    @property
    def size(self) -> int:
        return 3 * self.dimensions + len(self.vocabulary) + 1

    def to_dict(self):
        return {
            "vocabulary": list(self.vocabulary),
            "dimensions": self.dimensions,
            "embedding_header": self.embedding_header,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["vocabulary"]), int(d["dimensions"]), d.get("embedding_header", ""))

    @classmethod
    def for_graph(cls, g: PolicyGraph, emb: EmbeddingTable) -> "FeatureSpace":
        return cls(tuple(permission_vocabulary(g)), emb.dimensions, emb.header())


def _rule_keys(rule: Rule) -> tuple[str, str, str]:
    if isinstance(rule, AllowRule):
        return (
            node_key(SUBJECT, rule.source),
            node_key(OBJECT, rule.target, rule.security_class),
            node_key(CLASS, rule.security_class),
        )
    return (
        node_key(SUBJECT, rule.source_domain),
        node_key(OBJECT, rule.target_type, rule.security_class),
        node_key(CLASS, rule.security_class),
    )


def rule_vector(rule: Rule, emb: EmbeddingTable, space: FeatureSpace) -> np.ndarray:
    parts = []
    for key in _rule_keys(rule):
        if key not in emb:
            raise MissingNode(key)
        parts.append(emb[key])
    perms = np.zeros(len(space.vocabulary))
    if isinstance(rule, AllowRule):
        pos = {p: i for i, p in enumerate(space.vocabulary)}
        for p in rule.permissions:
            # permissions outside the training vocabulary have no slot
            if p in pos:
                perms[pos[p]] = 1.0
    parts.append(perms)
    return np.concatenate(parts)


def featurize_rules(rules, emb: EmbeddingTable, space: FeatureSpace) -> np.ndarray:
    if emb.dimensions != space.dimensions:
        raise DimensionMismatch(
            f"embedding has {emb.dimensions} dimensions, feature space expects {space.dimensions}"
        )
    rows = np.stack([rule_vector(r, emb, space) for r in rules])
    return np.append(rows.mean(axis=0), len(rules) / MAX_RULES)


def featurize_example(g: PolicyGraph | None, emb: EmbeddingTable, ex: LabeledExample,
                      space: FeatureSpace | None = None) -> np.ndarray:
    """Feature vector of one example; ``space`` defaults to the graph's vocabulary."""
    if space is None:
        space = FeatureSpace.for_graph(g, emb)
    return featurize_rules(ex.rules, emb, space)


def featurize_dataset(examples, emb: EmbeddingTable, space: FeatureSpace) -> tuple[np.ndarray, np.ndarray]:
    examples = list(examples)
    if not examples:
        return np.zeros((0, space.size)), np.zeros(0, dtype=np.int64)
    X = np.stack([featurize_rules(ex.rules, emb, space) for ex in examples])
    y = np.array([int(ex.label) for ex in examples], dtype=np.int64)
    return X, y
