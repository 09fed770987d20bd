"""Acceptance criteria, one PASS/FAIL line each (printed in the run summary).

Criterion 1 runs the whole pipeline four times (seed 42 with every model,
then seeds 43-45 without stacking) and dominates the runtime.
"""

import itertools
import logging
import time

import numpy as np
import pytest

from policy_fixtures import CORRUPTED, LISTING_4, LISTINGS
from sepolml.config import load_config
from sepolml.dataset import from_json
from sepolml.detectors import gradient_check, metrics_from_confusion
from sepolml.detectors.mlp import init_params
from sepolml.embedding import cosine_similarity, embed
from sepolml.embedding.alias import AliasTable
from sepolml.embedding.skipgram import TrainConfig
from sepolml.embedding.walks import WalkConfig, generate_walks, precompute_transition_tables
from sepolml.generator import GeneratorConfig, generate_dataset, policy_text, validate_dataset
from sepolml.graph import ALLOW, CLASS, INSTANCE_OF, OBJECT, SUBJECT, TRANSITION, UndirectedView, build_graph, export_json, graph_stats
from sepolml.parser import ParseError, parse_document, serialize
from sepolml.pipeline import MODEL_NAMES, Run, load_metrics, render_report

# kind -> (accuracy floor, reference macro-F1)
TARGETS = {"mlp": (0.90, 0.95), "rf": (0.88, 0.93), "svm": (0.80, 0.92)}
F1_TOLERANCE = 0.10
EXTRA_SEEDS = (43, 44, 45)
EXTRA_SEED_MLP_FLOOR = 0.88
TIME_BUDGET = 300.0


def record(log, number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    log.append(line)
    print(line)
    return ok


@pytest.fixture(scope="module")
def seed42_run(tmp_path_factory):
    cfg = load_config(seed=42, out=tmp_path_factory.mktemp("seed42"))
    start = time.perf_counter()
    run = Run(cfg)
    report_text = run.pipeline()
    elapsed = time.perf_counter() - start
    return run, report_text, elapsed


def test_criterion_1_classifier_accuracy(seed42_run, tmp_path_factory, acceptance_log):
    run, _, elapsed = seed42_run
    reports = load_metrics([run.paths.metrics(k) for k in ("rf", "svm", "mlp", "stacking")])
    n_examples = len(from_json(run.paths.dataset_json.read_text()))
    problems = []
    parts = []
    for kind, (floor, ref_f1) in TARGETS.items():
        r = reports[kind]
        parts.append(f"{kind} acc {r.accuracy:.3f} (>= {floor}) F1 {r.macro_avg[2]:.3f} (ref {ref_f1})")
        if r.accuracy < floor:
            problems.append(f"{kind} accuracy")
        if abs(r.macro_avg[2] - ref_f1) > F1_TOLERANCE:
            problems.append(f"{kind} macro-F1")
    if elapsed >= TIME_BUDGET:
        problems.append("time")
    seed_accs = {}
    for seed in EXTRA_SEEDS:
        cfg = load_config(seed=seed, out=tmp_path_factory.mktemp(f"seed{seed}"), models="rf,svm,mlp")
        Run(cfg).pipeline()
        seed_accs[seed] = load_metrics([Run(cfg).paths.metrics("mlp")])["mlp"].accuracy
        if seed_accs[seed] < EXTRA_SEED_MLP_FLOOR:
            problems.append(f"seed {seed} mlp")
    if n_examples != 451:
        problems.append("corpus size")
    ok = not problems
    seeds = ", ".join(f"{s}: {a:.3f}" for s, a in seed_accs.items())
    record(acceptance_log, 1, ok,
           f"seed 42, {n_examples} examples, "
           f"{elapsed:.0f}s (< {TIME_BUDGET:.0f}s); " + "; ".join(parts)
           + f"; mlp on seeds {seeds} (>= {EXTRA_SEED_MLP_FLOOR})"
           + (f"; failed: {', '.join(problems)}" if problems else ""))
    assert ok, problems


def test_stacking_and_class_9_checks(seed42_run):
    run, _, _ = seed42_run
    reports = load_metrics([run.paths.metrics(k) for k in ("rf", "svm", "mlp", "stacking")])
    base = min(reports[k].accuracy for k in ("rf", "svm", "mlp"))
    assert reports["stacking"].accuracy >= base - 0.05
    assert reports["mlp"].recall(9) >= 0.95


def test_criterion_2_oracle_soundness(acceptance_log):
    results = []
    for seed, per_label in itertools.product((1, 2, 3), (10, 41)):
        cfg = GeneratorConfig(examples_per_label=per_label, seed=seed)
        report = validate_dataset(generate_dataset(cfg), cfg)
        results.append((seed, per_label, report.agreement))
    ok = all(a == 1.0 for *_, a in results)
    worst = min(a for *_, a in results)
    record(acceptance_log, 2, ok, f"oracle agreement over 3 seeds x sizes (110, 451): min {worst:.3f} (need 1.000)")
    assert ok


def test_criterion_3_metrics_oracle(acceptance_log):
    r = metrics_from_confusion([[2, 0], [1, 1]])
    fixture_ok = abs(r.accuracy - 0.75) <= 1e-3 and all(
        abs(a - b) <= 1e-3 for a, b in zip(r.macro_avg, (0.833, 0.750, 0.733))
    )
    rng = np.random.default_rng(2024)
    identity_ok = True
    for _ in range(100):
        k = int(rng.integers(2, 12))
        cm = rng.integers(0, 8, size=(k, k))
        cm[0, 0] += 1
        m = metrics_from_confusion(cm)
        identity_ok &= abs(m.weighted_avg[1] - m.accuracy) <= 1e-12
    ok = fixture_ok and identity_ok
    record(acceptance_log, 3, ok,
           f"fixture acc {r.accuracy:.3f} macro {'/'.join(f'{v:.3f}' for v in r.macro_avg)}; "
           f"weighted recall == accuracy on 100 matrices: {identity_ok}")
    assert ok


def test_criterion_4_bias_and_alias(acceptance_log):
    path = UndirectedView.from_edges(3, [(0, 1), (1, 2)])
    cfg = WalkConfig(p=2.0, q=0.5, walk_length=3, walks_per_node=10_000, seed=4)
    exact = precompute_transition_tables(path, cfg).probabilities(0, 1)
    third = np.array([w[2] for w in generate_walks(path, cfg) if w[0] == 0])
    emp = {0: float(np.mean(third == 0)), 2: float(np.mean(third == 2))}
    bias_err = max(abs(emp[0] - 0.2), abs(emp[2] - 0.8), abs(exact[0] - 0.2), abs(exact[2] - 0.8))
    w = np.array([0.5, 1.0, 2.0, 3.5, 0.25, 2.75])
    draws = AliasTable.from_weights(w).sample(np.random.default_rng(4), 1_000_000)
    alias_err = float(np.max(np.abs(np.bincount(draws, minlength=len(w)) / len(draws) - w / w.sum())))
    ok = bias_err <= 0.03 and alias_err <= 0.005
    record(acceptance_log, 4, ok,
           f"path p=2 q=0.5 over {len(third)} steps: P(a)={emp[0]:.4f} P(c)={emp[2]:.4f} "
           f"(max err {bias_err:.4f} <= 0.03); alias max err {alias_err:.5f} at 1e6 (<= 0.005)")
    assert ok


def test_criterion_5_homophily_and_determinism(acceptance_log):
    edges = list(itertools.combinations(range(5), 2)) + list(itertools.combinations(range(5, 10), 2))
    edges += [(4, 10), (10, 11), (11, 12), (12, 5)]
    view = UndirectedView.from_edges(13, edges)
    wins = 0
    for seed in range(5):
        v = embed(view, WalkConfig(seed=seed), TrainConfig(dimensions=16, seed=seed)).vectors
        within = np.mean([cosine_similarity(v[a], v[b]) for grp in (range(5), range(5, 10))
                          for a, b in itertools.combinations(grp, 2)])
        across = np.mean([cosine_similarity(v[a], v[b]) for a in range(5) for b in range(5, 10)])
        wins += within > across
    a = embed(view, WalkConfig(seed=9), TrainConfig(dimensions=16, seed=9)).vectors
    b = embed(view, WalkConfig(seed=9), TrainConfig(dimensions=16, seed=9)).vectors
    bitwise = bool(np.array_equal(a, b))
    ok = wins >= 4 and bitwise
    record(acceptance_log, 5, ok, f"barbell within > across in {wins}/5 seeds (need 4); bitwise reproducible: {bitwise}")
    assert ok


def test_criterion_6_gradient_check(acceptance_log):
    rng = np.random.default_rng(6)
    X = rng.normal(size=(5, 12))
    y = np.array([0, 4, 9, 10, 4])
    err = gradient_check(init_params([12, 16, 11], rng), X, y, eps=1e-4)
    ok = err <= 1e-3
    record(acceptance_log, 6, ok, f"MLP gradient max relative error {err:.2e} on a 5-sample batch (<= 1e-3)")
    assert ok


def test_criterion_7_parser_round_trip(acceptance_log):
    listings_ok = all(
        parse_document(serialize(parse_document(t))) == parse_document(t)
        and serialize(parse_document(serialize(parse_document(t)))) == serialize(parse_document(t))
        for t in LISTINGS
    )
    text = policy_text(generate_dataset(GeneratorConfig(examples_per_label=41, seed=42)))
    doc = parse_document(text)
    corpus_ok = parse_document(serialize(doc)) == doc and serialize(parse_document(serialize(doc))) == serialize(doc)
    exact = 0
    for bad, line, col in CORRUPTED:
        try:
            parse_document(bad)
        except ParseError as exc:
            exact += (exc.line, exc.column) == (line, col)
    ok = listings_ok and corpus_ok and exact == len(CORRUPTED)
    record(acceptance_log, 7, ok,
           f"listings 1-4 fixpoint: {listings_ok}; 451-example corpus ({len(doc.rules)} rules) fixpoint: {corpus_ok}; "
           f"error positions exact on {exact}/{len(CORRUPTED)} fixtures")
    assert ok


def test_criterion_8_graph_conformance(acceptance_log):
    g = build_graph([parse_document(LISTING_4)])
    stats = graph_stats(g)
    kinds_ok = (
        stats["nodes_by_kind"] == {SUBJECT: 2, OBJECT: 2, CLASS: 1}
        and stats["edges_by_relation"] == {ALLOW: 2, TRANSITION: 0, INSTANCE_OF: 2}
        and set(g.node("SecurityClass:file").permissions) == {"read", "write"}
    )
    twice = build_graph([parse_document(LISTING_4 + LISTING_4)])
    idempotent = export_json(twice) == export_json(g)
    ok = stats["node_count"] == 5 and stats["edge_count"] == 4 and kinds_ok and idempotent
    record(acceptance_log, 8, ok,
           f"Listing 4 graph {stats['node_count']} nodes / {stats['edge_count']} edges, kinds match: {kinds_ok}; "
           f"duplicate-rule idempotence: {idempotent}")
    assert ok


def test_criterion_9_per_label_reporting(seed42_run, acceptance_log, caplog):
    run, report_text, _ = seed42_run
    rows = [line for line in report_text.splitlines() if line.startswith("| ") and line[2:4].strip().isdigit()]
    labels = sorted(int(r.split("|")[1]) for r in rows)
    reports = load_metrics([run.paths.metrics(k) for k in ("rf", "svm", "mlp", "stacking")])
    with caplog.at_level(logging.INFO, logger="sepolml.pipeline"):
        render_report(reports)
    messages = [r.getMessage() for r in caplog.records]
    logged = all(any(m.startswith(f"{k}: label 10 recall") for m in messages) for k in reports)
    weak = [k for k, r in reports.items() if r.recall(10) < 0.5]
    flagged = all(f"FLAG: {MODEL_NAMES[k]} recall on label 10" in report_text for k in weak)
    ok = labels == list(range(11)) and logged and flagged
    recalls = ", ".join(f"{k} {r.recall(10):.2f}" for k, r in reports.items())
    record(acceptance_log, 9, ok,
           f"report lists recall for labels {labels[0]}-{labels[-1]} ({len(labels)} rows); "
           f"label 10 recall logged ({recalls}); flagged models: {weak or 'none'}")
    assert ok
