"""Subject / Object / Class property graph built from parsed policies.

Node kinds and edge relations:

* ``Subject`` - a domain type that appears as a rule source.
* ``Object`` - a (type, security class) pair that appears as a rule target.
* ``SecurityClass`` - an object class with the union of permissions granted on it.

* ``ALLOW``       Subject -> Object, carries permissions and the class.
* ``TRANSITION``  Subject -> Subject (source domain -> new domain), carries the
  executable type as ``via_type``.
* ``INSTANCE_OF`` Object -> SecurityClass.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .parser import AllowRule, PolicyDocument, Rule, TypeTransitionRule

SUBJECT = "Subject"
OBJECT = "Object"
CLASS = "SecurityClass"
NODE_KINDS = (SUBJECT, OBJECT, CLASS)

ALLOW = "ALLOW"
TRANSITION = "TRANSITION"
INSTANCE_OF = "INSTANCE_OF"
RELATIONS = (ALLOW, TRANSITION, INSTANCE_OF)

_CYPHER_LABEL = {SUBJECT: "Subject", OBJECT: "Object", CLASS: "Class"}


@dataclass
class GraphNode:
    id: int
    kind: str
    name: str
    type_name: str | None = None
    class_name: str | None = None
    permissions: list[str] = field(default_factory=list)

    @property
    def key(self) -> str:
        return node_key(self.kind, self.type_name or self.name, self.class_name)


@dataclass
class GraphEdge:
    source: int
    target: int
    relation: str
    permissions: list[str] = field(default_factory=list)
    via_type: str | None = None
    security_class: str | None = None


def node_key(kind: str, name: str, class_name: str | None = None) -> str:
    """Canonical textual key, unique per (kind, identity)."""
    if kind == OBJECT:
        return f"{OBJECT}:{name}:{class_name}"
    return f"{kind}:{name}"


class PolicyGraph:
    def __init__(self):
        self.nodes: list[GraphNode] = []
        self.edges: list[GraphEdge] = []
        self.out_edges: list[list[int]] = []
        self.in_edges: list[list[int]] = []
        self.name_index: dict[str, int] = {}
        self.merged_edges = 0
        self._edge_index: dict[tuple, int] = {}

    def __len__(self):
        return len(self.nodes)

    def node(self, key: str) -> GraphNode:
        return self.nodes[self.name_index[key]]

    def lookup(self, kind, name, class_name=None) -> int | None:
        return self.name_index.get(node_key(kind, name, class_name))

    # -- construction ---------------------------------------------------------

    def _ensure_node(self, kind, name, class_name=None, display=None) -> int:
        key = node_key(kind, name, class_name)
        nid = self.name_index.get(key)
        if nid is not None:
            return nid
        nid = len(self.nodes)
        if kind == CLASS:
            node = GraphNode(nid, kind, name)
        else:
            node = GraphNode(nid, kind, display or name, type_name=name, class_name=class_name)
        self.nodes.append(node)
        self.out_edges.append([])
        self.in_edges.append([])
        self.name_index[key] = nid
        return nid

    def _add_edge(self, source, target, relation, perms=(), via_type=None, security_class=None):
        ekey = (source, target, relation, security_class)
        idx = self._edge_index.get(ekey)
        if idx is not None:
            self.merged_edges += 1
            edge = self.edges[idx]
            edge.permissions.extend(p for p in perms if p not in edge.permissions)
            return idx
        idx = len(self.edges)
        self.edges.append(
            GraphEdge(source, target, relation, list(perms), via_type, security_class)
        )
        self._edge_index[ekey] = idx
        self.out_edges[source].append(idx)
        self.in_edges[target].append(idx)
        return idx

    def add_rule(self, rule: Rule, instance_names: Mapping[str, str] | None = None):
        names = instance_names or {}
        if isinstance(rule, AllowRule):
            cls = rule.security_class
            s = self._ensure_node(SUBJECT, rule.source)
            o = self._ensure_node(OBJECT, rule.target, cls, names.get(rule.target))
            c = self._ensure_node(CLASS, cls)
            self._add_edge(s, o, ALLOW, rule.permissions, security_class=cls)
            self._add_edge(o, c, INSTANCE_OF)
            class_perms = self.nodes[c].permissions
            class_perms.extend(p for p in rule.permissions if p not in class_perms)
        elif isinstance(rule, TypeTransitionRule):
            cls = rule.security_class
            s = self._ensure_node(SUBJECT, rule.source_domain)
            n = self._ensure_node(SUBJECT, rule.new_type)
            o = self._ensure_node(OBJECT, rule.target_type, cls, names.get(rule.target_type))
            c = self._ensure_node(CLASS, cls)
            self._add_edge(s, n, TRANSITION, via_type=rule.target_type, security_class=cls)
            self._add_edge(o, c, INSTANCE_OF)
        else:
            raise TypeError(f"not a rule: {rule!r}")

    # -- node lookups used by featurization ------------------------------------

    def rule_nodes(self, rule: Rule) -> tuple[str, str, str]:
        """Keys of the (subject, object, class) nodes a rule maps onto."""
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


def build_graph(
    docs: Iterable[PolicyDocument | Iterable[Rule]],
    instance_names: Mapping[str, str] | None = None,
) -> PolicyGraph:
    """Build one graph from several documents (or plain rule lists).

    ``instance_names`` maps object type names to instance names (e.g. file
    paths); objects without an entry are named after their type.
    """
    g = PolicyGraph()
    for doc in docs:
        rules = doc.rules if isinstance(doc, PolicyDocument) else doc
        for rule in rules:
            g.add_rule(rule, instance_names)
    return g


def graph_stats(g: PolicyGraph) -> dict:
    degree = Counter()
    for i in range(len(g.nodes)):
        degree[len(g.out_edges[i]) + len(g.in_edges[i])] += 1
    kinds = Counter(n.kind for n in g.nodes)
    rels = Counter(e.relation for e in g.edges)
    return {
        "node_count": len(g.nodes),
        "edge_count": len(g.edges),
        "nodes_by_kind": {k: kinds.get(k, 0) for k in NODE_KINDS},
        "edges_by_relation": {r: rels.get(r, 0) for r in RELATIONS},
        "degree_histogram": dict(sorted(degree.items())),
        "merged_edges": g.merged_edges,
    }


# -- export -------------------------------------------------------------------


def _sorted_edges(g: PolicyGraph) -> list[GraphEdge]:
    return sorted(g.edges, key=lambda e: (e.source, e.target, RELATIONS.index(e.relation), e.security_class or ""))


def _node_record(n: GraphNode) -> dict:
    return {
        "id": n.id,
        "kind": n.kind,
        "name": n.name,
        "type_name": n.type_name,
        "class_name": n.class_name,
        "permissions": sorted(n.permissions),
    }


def _edge_record(e: GraphEdge) -> dict:
    return {
        "from": e.source,
        "to": e.target,
        "relation": e.relation,
        "permissions": list(e.permissions),
        "via_type": e.via_type,
        "security_class": e.security_class,
    }


def export_json(g: PolicyGraph) -> str:
    doc = {
        "nodes": [_node_record(n) for n in g.nodes],
        "edges": [_edge_record(e) for e in _sorted_edges(g)],
    }
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)


def graph_from_json(text: str) -> PolicyGraph:
    data = json.loads(text)
    g = PolicyGraph()
    for i, rec in enumerate(data["nodes"]):
        if rec["id"] != i:
            raise ValueError(f"node ids must be dense and ordered; got {rec['id']} at {i}")
        node = GraphNode(
            i, rec["kind"], rec["name"], rec["type_name"], rec["class_name"], list(rec["permissions"])
        )
        g.nodes.append(node)
        g.out_edges.append([])
        g.in_edges.append([])
        g.name_index[node.key] = i
    for rec in data["edges"]:
        g._add_edge(
            rec["from"], rec["to"], rec["relation"], rec["permissions"],
            rec["via_type"], rec["security_class"],
        )
    return g


def cypher_string(value: str) -> str:
    return "'" + value.replace("\\", "\\\\").replace("'", "\\'") + "'"


def _cypher_props(props: dict) -> str:
    parts = []
    for k, v in props.items():
        if v is None:
            continue
        if isinstance(v, list):
            v = "[" + ", ".join(cypher_string(x) for x in v) + "]"
        elif isinstance(v, str):
            v = cypher_string(v)
        parts.append(f"{k}: {v}")
    return "{" + ", ".join(parts) + "}"


def export_cypher(g: PolicyGraph) -> str:
    """CREATE clauses, one per line; together they form a single Cypher query."""
    lines = []
    for n in g.nodes:
        props = {"name": n.name}
        if n.kind == SUBJECT:
            props["type"] = n.type_name
        elif n.kind == OBJECT:
            props["type"] = n.type_name
            props["class"] = n.class_name
        else:
            props["permissions"] = sorted(n.permissions)
        lines.append(f"CREATE (n{n.id}:{_CYPHER_LABEL[n.kind]} {_cypher_props(props)})")
    for e in _sorted_edges(g):
        props = {}
        if e.relation == ALLOW:
            props = {"class": e.security_class, "permissions": list(e.permissions)}
        elif e.relation == TRANSITION:
            props = {"class": e.security_class, "via_type": e.via_type}
        body = f" {_cypher_props(props)}" if props else ""
        lines.append(f"CREATE (n{e.source})-[:{e.relation}{body}]->(n{e.target})")
    return "".join(line + "\n" for line in lines)


# -- walk view ----------------------------------------------------------------


@dataclass(frozen=True)
class UndirectedView:
    """CSR adjacency with sorted, de-duplicated neighbour lists; all weights 1.0."""

    indptr: np.ndarray
    indices: np.ndarray

    @property
    def node_count(self) -> int:
        return len(self.indptr) - 1

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    def degree(self, v: int) -> int:
        return int(self.indptr[v + 1] - self.indptr[v])

    @classmethod
    def from_edges(cls, node_count: int, edges: Iterable[tuple[int, int]]) -> "UndirectedView":
        nbrs = [set() for _ in range(node_count)]
        for a, b in edges:
            nbrs[a].add(b)
            nbrs[b].add(a)
        indptr = np.zeros(node_count + 1, dtype=np.int64)
        for v, s in enumerate(nbrs):
            indptr[v + 1] = indptr[v] + len(s)
        indices = np.fromiter(
            (x for s in nbrs for x in sorted(s)), dtype=np.int64, count=int(indptr[-1])
        )
        return cls(indptr, indices)


def undirected_view(g: PolicyGraph) -> UndirectedView:
    return UndirectedView.from_edges(len(g.nodes), ((e.source, e.target) for e in g.edges))
