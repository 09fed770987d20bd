import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sepolml.graph import (
    ALLOW,
    CLASS,
    INSTANCE_OF,
    OBJECT,
    SUBJECT,
    TRANSITION,
    UndirectedView,
    build_graph,
    export_cypher,
    export_json,
    graph_from_json,
    graph_stats,
    node_key,
    undirected_view,
)
from sepolml.parser import AllowRule, parse_document

LISTING_2 = "type_transition httpd_t httpd_exec_t:process httpd_child_t;"
LISTING_4 = """\
allow financial_process_t financial_data_t:file { read write };
allow audit_process_t audit_log_t:file { write };
"""


def listing4():
    return build_graph([parse_document(LISTING_4)])


def test_listing_4_graph():
    g = listing4()
    stats = graph_stats(g)
    assert stats["node_count"] == 5
    assert stats["edge_count"] == 4
    assert stats["nodes_by_kind"] == {SUBJECT: 2, OBJECT: 2, CLASS: 1}
    assert stats["edges_by_relation"] == {ALLOW: 2, TRANSITION: 0, INSTANCE_OF: 2}
    file_node = g.node(node_key(CLASS, "file"))
    assert set(file_node.permissions) == {"read", "write"}
    allow = [e for e in g.edges if e.relation == ALLOW]
    assert all(g.nodes[e.source].kind == SUBJECT and g.nodes[e.target].kind == OBJECT for e in allow)
    assert all(e.security_class == "file" for e in allow)


def test_listing_2_graph():
    g = build_graph([parse_document(LISTING_2)])
    keys = {n.key for n in g.nodes}
    assert keys == {
        node_key(SUBJECT, "httpd_t"),
        node_key(SUBJECT, "httpd_child_t"),
        node_key(OBJECT, "httpd_exec_t", "process"),
        node_key(CLASS, "process"),
    }
    (tr,) = [e for e in g.edges if e.relation == TRANSITION]
    assert g.nodes[tr.source].type_name == "httpd_t"
    assert g.nodes[tr.target].type_name == "httpd_child_t"
    assert (tr.via_type, tr.security_class) == ("httpd_exec_t", "process")
    assert graph_stats(g)["edges_by_relation"] == {ALLOW: 0, TRANSITION: 1, INSTANCE_OF: 1}
    doc = json.loads(export_json(g))
    assert (len(doc["nodes"]), len(doc["edges"])) == (4, 2)


def test_empty_graph():
    g = build_graph([])
    stats = graph_stats(g)
    assert stats["node_count"] == stats["edge_count"] == 0
    assert set(stats["nodes_by_kind"].values()) == {0}
    assert export_json(g) == '{"nodes":[],"edges":[]}'
    assert export_cypher(g) == ""


def test_duplicate_rule_is_idempotent():
    once = build_graph([parse_document(LISTING_4)])
    twice = build_graph([parse_document(LISTING_4 + LISTING_4)])
    assert export_json(once) == export_json(twice)
    assert twice.merged_edges == 4


def test_permissions_merge_on_one_edge():
    g = build_graph([parse_document("allow a b:file read;\nallow a b:file { write read };")])
    (edge,) = [e for e in g.edges if e.relation == ALLOW]
    assert sorted(edge.permissions) == ["read", "write"]


def test_same_type_as_subject_and_object():
    g = build_graph([parse_document("allow a b:file read;\nallow b a:file read;")])
    assert graph_stats(g)["nodes_by_kind"] == {SUBJECT: 2, OBJECT: 2, CLASS: 1}


def test_object_identity_includes_class():
    g = build_graph([parse_document("allow a b:file read;\nallow a b:dir search;")])
    assert graph_stats(g)["nodes_by_kind"][OBJECT] == 2


def test_json_round_trip_is_byte_identical():
    g = listing4()
    text = export_json(g)
    assert export_json(graph_from_json(text)) == text


def test_cypher_listing_4():
    lines = export_cypher(listing4()).splitlines()
    assert sum(line.startswith("CREATE (n") and ")-[" not in line for line in lines) == 5
    assert sum(")-[:" in line for line in lines) == 4
    assert lines[0] == "CREATE (n0:Subject {name: 'financial_process_t', type: 'financial_process_t'})"
    assert "CREATE (n0)-[:ALLOW {class: 'file', permissions: ['read', 'write']}]->(n1)" in lines


def test_cypher_escapes_quotes():
    g = build_graph([[AllowRule("a", "b", "file", ("read",))]], instance_names={"b": "/srv/it's\\here"})
    text = export_cypher(g)
    assert "name: '/srv/it\\'s\\\\here'" in text


def test_instance_names_become_object_names():
    g = build_graph([parse_document("allow a b:file read;")], instance_names={"b": "/var/log/b"})
    assert g.node(node_key(OBJECT, "b", "file")).name == "/var/log/b"


def test_undirected_view_listing_4():
    g = listing4()
    view = undirected_view(g)
    assert view.degree(g.name_index[node_key(CLASS, "file")]) == 2
    for e in g.edges:
        assert e.target in view.neighbors(e.source)
        assert e.source in view.neighbors(e.target)


def test_undirected_view_basics():
    view = UndirectedView.from_edges(3, [(0, 1), (1, 1)])
    assert list(view.neighbors(0)) == [1]
    assert list(view.neighbors(1)) == [0, 1]  # self-loop kept once
    assert list(view.neighbors(2)) == []


names = st.sampled_from(["a", "b", "c", "d"])
perms = st.lists(st.sampled_from(["read", "write", "open"]), min_size=1, max_size=3, unique=True).map(tuple)
rules = st.builds(AllowRule, names, names, st.sampled_from(["file", "dir"]), perms)


@settings(max_examples=100, deadline=None)
@given(st.lists(rules, max_size=10))
def test_graph_invariants(rs):
    g = build_graph([rs])
    keys = [(n.kind, n.key) for n in g.nodes]
    assert len(keys) == len(set(keys))
    allow = [e for e in g.edges if e.relation == ALLOW]
    assert len(allow) == len({(r.source, r.target, r.security_class) for r in rs})
    tuples = {(r.source, r.target, r.security_class, p) for r in rs for p in r.permissions}
    assert sum(len(e.permissions) for e in allow) == len(tuples)
    # doubling the input changes nothing
    assert export_json(build_graph([rs + rs])) == export_json(g)
    for i, out in enumerate(g.out_edges):
        assert all(g.edges[k].source == i for k in out)


def test_corpus_counts_match_scan():
    from sepolml.generator import GeneratorConfig, generate_dataset
    from sepolml.parser import TypeTransitionRule

    ds = generate_dataset(GeneratorConfig(examples_per_label=5, seed=3))
    g = build_graph([ex.rules for ex in ds], ds.instance_names())
    rules = [r for ex in ds for r in ex.rules]
    allow = {(r.source, r.target, r.security_class) for r in rules if isinstance(r, AllowRule)}
    trans = {(r.source_domain, r.new_type, r.security_class) for r in rules if isinstance(r, TypeTransitionRule)}
    objects = {(a[1], a[2]) for a in allow}
    objects |= {(r.target_type, r.security_class) for r in rules if isinstance(r, TypeTransitionRule)}
    stats = graph_stats(g)
    assert stats["edges_by_relation"] == {ALLOW: len(allow), TRANSITION: len(trans), INSTANCE_OF: len(objects)}
    assert stats["nodes_by_kind"][OBJECT] == len(objects)


def test_unknown_node_raises():
    with pytest.raises(KeyError):
        listing4().node("Subject:nope")
