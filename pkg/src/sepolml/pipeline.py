"""Pipeline stages over a run directory.

Layout of a run directory::

    corpus/   policy.te dataset.csv dataset.json
    graph/    graph.json graph.cypher stats.json
    embed/    embeddings.txt
    models/   split.json <kind>.json
    metrics/  <kind>.json
    report.md
    manifest.json

Each stage checks its inputs against the manifest, writes its outputs and
records their hashes.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dataset import LABELS, MAX_RULES, LabeledDataset, from_json, load_dataset
from .detectors import (
    DimensionMismatch,
    FeatureSpace,
    MetricsReport,
    evaluate,
    featurize_dataset,
    featurize_rules,
    model_from_json,
    model_to_json,
    predict_with_report,
    stratified_split,
    train_mlp,
    train_random_forest,
    train_stacking,
    train_svm,
)
from .embedding import embed, load_embeddings, save_embeddings
from .errors import DataError, SepolmlError
from .generator import generate_dataset, validate_dataset, write_corpus
from .graph import build_graph, export_cypher, export_json, graph_from_json, graph_stats
from .manifest import Manifest, now
from .parser import parse_document, rule_type_refs

log = logging.getLogger(__name__)

MODEL_NAMES = {"rf": "Random Forest", "svm": "SVM", "mlp": "MLP", "stacking": "Stacking"}
WEAK_LABEL = 10
WEAK_RECALL = 0.5


class StageError(SepolmlError):
    """Wraps a module error with the stage it surfaced in; keeps the exit code of the cause."""

    def __init__(self, stage: str, cause: SepolmlError):
        self.stage = stage
        self.cause = cause
        self.exit_code = cause.exit_code
        super().__init__(f"[{stage}] {cause}")


@dataclass
class Paths:
    root: Path

    @property
    def corpus(self):
        return self.root / "corpus"

    @property
    def dataset_json(self):
        return self.corpus / "dataset.json"

    @property
    def graph_json(self):
        return self.root / "graph" / "graph.json"

    @property
    def embeddings(self):
        return self.root / "embed" / "embeddings.txt"

    @property
    def split(self):
        return self.root / "models" / "split.json"

    def model(self, kind):
        return self.root / "models" / f"{kind}.json"

    def metrics(self, kind):
        return self.root / "metrics" / f"{kind}.json"

    @property
    def report(self):
        return self.root / "report.md"


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return path


def _read(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _stage(name):
    """Decorator: tag module errors with the stage name."""

    def wrap(fn):
        def run(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except SepolmlError as exc:
                raise StageError(name, exc) from exc

        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


class Run:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.paths = Paths(cfg.out)
        self.manifest = Manifest(cfg.out, cfg.snapshot())

    # -- stages ---------------------------------------------------------------

    @_stage("generate")
    def generate(self) -> LabeledDataset:
        started = now()
        ds = generate_dataset(self.cfg.generator)
        report = validate_dataset(ds, self.cfg.generator)
        if not report.ok:
            log.warning("oracle disagrees with %d generated labels", len(report.disagreements))
        files = write_corpus(ds, self.paths.corpus)
        log.info("generated %d examples (oracle agreement %.3f)", len(ds), report.agreement)
        self.manifest.record("generate", [], sorted(files.values()), started)
        return ds

    @_stage("graph")
    def graph(self):
        started = now()
        src = self.paths.dataset_json
        self.manifest.require(src, "generate")
        ds = from_json(_read(src))
        g = build_graph([ex.rules for ex in ds], ds.instance_names())
        out = self.paths.graph_json.parent
        outputs = [
            _write(out / "graph.json", export_json(g)),
            _write(out / "graph.cypher", export_cypher(g)),
            _write(out / "stats.json", json.dumps(graph_stats(g), sort_keys=True, indent=1) + "\n"),
        ]
        log.info("graph: %d nodes, %d edges, %d merged", len(g.nodes), len(g.edges), g.merged_edges)
        self.manifest.record("graph", [src], outputs, started)
        return g

    @_stage("embed")
    def embed(self):
        started = now()
        src = self.paths.graph_json
        self.manifest.require(src, "graph")
        g = graph_from_json(_read(src))
        table = embed(g, self.cfg.walk, self.cfg.train)
        self.paths.embeddings.parent.mkdir(parents=True, exist_ok=True)
        save_embeddings(table, self.paths.embeddings)
        log.info("embedded %d nodes in %d dimensions", table.node_count, table.dimensions)
        self.manifest.record("embed", [src], [self.paths.embeddings], started)
        return table

    def _features(self):
        for path, producer in ((self.paths.dataset_json, "generate"), (self.paths.graph_json, "graph"),
                               (self.paths.embeddings, "embed")):
            self.manifest.require(path, producer)
        ds = from_json(_read(self.paths.dataset_json))
        g = graph_from_json(_read(self.paths.graph_json))
        emb = load_embeddings(self.paths.embeddings)
        return ds, FeatureSpace.for_graph(g, emb), emb

    @_stage("train")
    def train(self, kinds=None):
        started = now()
        kinds = tuple(kinds or self.cfg.model_kinds)
        ds, space, emb = self._features()
        train_ds, test_ds = stratified_split(ds, self.cfg.test_fraction, self.cfg.seed)
        X, y = featurize_dataset(train_ds, emb, space)
        split = {
            "seed": self.cfg.seed,
            "test_fraction": self.cfg.test_fraction,
            "train": [ex.example_id for ex in train_ds],
            "test": [ex.example_id for ex in test_ds],
        }
        outputs = [_write(self.paths.split, json.dumps(split, indent=1) + "\n")]
        trainers = {
            "rf": lambda: train_random_forest(X, y, self.cfg.forest),
            "svm": lambda: train_svm(X, y, self.cfg.svm),
            "mlp": lambda: train_mlp(X, y, self.cfg.mlp),
            "stacking": lambda: train_stacking(X, y, self.cfg.stacking),
        }
        models = {}
        for kind in kinds:
            model = trainers[kind]()
            model.feature_space = space.to_dict()
            outputs.append(_write(self.paths.model(kind), model_to_json(model)))
            models[kind] = model
            log.info("trained %s on %d examples", kind, len(y))
        inputs = [self.paths.dataset_json, self.paths.graph_json, self.paths.embeddings]
        self.manifest.record("train", inputs, outputs, started)
        return models

    @_stage("evaluate")
    def evaluate(self, kinds=None) -> dict[str, MetricsReport]:
        started = now()
        kinds = tuple(kinds or self.cfg.model_kinds)
        ds, space, emb = self._features()
        self.manifest.require(self.paths.split, "train")
        split = json.loads(_read(self.paths.split))
        by_id = {ex.example_id: ex for ex in ds}
        try:
            test = [by_id[i] for i in split["test"]]
        except KeyError as exc:
            raise DataError(f"split refers to unknown example {exc}") from None
        reports, inputs, outputs = {}, [self.paths.split], []
        for kind in kinds:
            path = self.paths.model(kind)
            self.manifest.require(path, "train")
            model = model_from_json(_read(path))
            X, y = featurize_dataset(test, emb, _model_space(model, space))
            report = evaluate(model, X, y)
            reports[kind] = report
            inputs.append(path)
            outputs.append(_write(self.paths.metrics(kind), metrics_json(kind, report)))
            log.info("%s accuracy %.4f", kind, report.accuracy)
        self.manifest.record("evaluate", inputs, outputs, started)
        return reports

    @_stage("report")
    def report(self, kinds=None) -> str:
        started = now()
        kinds = tuple(kinds or self.cfg.model_kinds)
        paths = [self.paths.metrics(k) for k in kinds]
        for p in paths:
            self.manifest.require(p, "evaluate")
        text = render_report(load_metrics(paths))
        _write(self.paths.report, text)
        self.manifest.record("report", paths, [self.paths.report], started)
        return text

    def pipeline(self) -> str:
        self.generate()
        self.graph()
        self.embed()
        self.train()
        self.evaluate()
        return self.report()


def _model_space(model, fallback: FeatureSpace) -> FeatureSpace:
    if model.feature_space is None:
        return fallback
    space = FeatureSpace.from_dict(model.feature_space)
    if space.dimensions != fallback.dimensions:
        raise DimensionMismatch(
            f"model expects {space.dimensions}-dimensional embeddings, found {fallback.dimensions}"
        )
    return space


# -- metrics files and the report ---------------------------------------------


def metrics_json(kind: str, report: MetricsReport) -> str:
    return json.dumps({"model": kind, **report.to_dict()}, indent=1) + "\n"


def load_metrics(paths) -> dict[str, MetricsReport]:
    out = {}
    for p in paths:
        try:
            doc = json.loads(_read(p))
        except FileNotFoundError:
            raise DataError(f"metrics file {p} not found; run `sepolml evaluate`") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"{p}: {exc}") from exc
        kind = doc.pop("model", Path(p).stem)
        out[kind] = MetricsReport.from_dict(doc)
    return out


def _triple(t):
    return "/".join(f"{v:.2f}" for v in t)


def render_report(reports: dict[str, MetricsReport]) -> str:
    lines = [
        "| Model | Accuracy | Macro Avg (P/R/F1) | Weighted Avg (P/R/F1) |",
        "|---|---|---|---|",
    ]
    for kind, r in reports.items():
        name = MODEL_NAMES.get(kind, kind)
        lines.append(f"| {name} | {r.accuracy:.2f} | {_triple(r.macro_avg)} | {_triple(r.weighted_avg)} |")
    lines += ["", "Per-label recall", ""]
    lines.append("| Label | Description | " + " | ".join(MODEL_NAMES.get(k, k) for k in reports) + " |")
    lines.append("|---|---|" + "---|" * len(reports))
    for label in LABELS:
        cells = []
        for r in reports.values():
            cells.append(f"{r.recall(label):.2f}" if r.per_label[label].support else "n/a")
        lines.append(f"| {int(label)} | {label.description} | " + " | ".join(cells) + " |")
    flags = []
    for kind, r in reports.items():
        rec = r.recall(WEAK_LABEL)
        log.info("%s: label %d recall %.2f", kind, WEAK_LABEL, rec)
        if r.per_label[WEAK_LABEL].support and rec < WEAK_RECALL:
            flags.append(f"- FLAG: {MODEL_NAMES.get(kind, kind)} recall on label {WEAK_LABEL} is {rec:.2f} (< {WEAK_RECALL:.2f})")
            log.warning("%s recall on label %d is %.2f, below %.2f", kind, WEAK_LABEL, rec, WEAK_RECALL)
    if flags:
        lines += [""] + flags
    return "\n".join(lines) + "\n"


# -- prediction on arbitrary policy files -------------------------------------


def group_by_components(rules) -> list[list]:
    """Rules sharing any type name end up in one group; groups ordered by first rule."""
    parent: dict[str, str] = {}

    def find(x):
        while parent.setdefault(x, x) != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for rule in rules:
        names = rule_type_refs(rule)
        for n in names[1:]:
            ra, rb = find(names[0]), find(n)
            if ra != rb:
                parent[rb] = ra
        find(names[0])
    groups: dict[str, list] = {}
    for rule in rules:
        groups.setdefault(find(rule_type_refs(rule)[0]), []).append(rule)
    return list(groups.values())


def _chunks(rules, size):
    return [rules[i:i + size] for i in range(0, len(rules), size)]


@_stage("predict")
def predict_file(model_path, policy_path, embeddings_path, dataset_path=None) -> str:
    """Label every example of a policy file; returns the CSV text.

    With ``dataset_path`` the examples are the dataset's; otherwise rules
    that share a type name form one example.
    """
    model = model_from_json(_read(model_path))
    emb = load_embeddings(embeddings_path)
    if model.feature_space is None:
        raise DataError(f"{model_path} has no feature space; retrain with `sepolml train`")
    space = FeatureSpace.from_dict(model.feature_space)
    if space.dimensions != emb.dimensions or space.size != model.feature_dimension:
        raise DimensionMismatch(
            f"model takes {model.feature_dimension} features ({space.dimensions}-d embeddings); "
            f"{embeddings_path} holds {emb.dimensions}-d embeddings"
        )
    if dataset_path is not None:
        ds = load_dataset(dataset_path)
        groups = [(ex.example_id, list(ex.rules)) for ex in ds]
    else:
        doc = parse_document(_read(policy_path), source_name=str(policy_path))
        groups = []
        for comp in group_by_components(list(doc.rules)):
            # components larger than an example are cut into example-sized pieces
            for piece in _chunks(comp, MAX_RULES):
                groups.append((f"group{len(groups) + 1:04d}", piece))
    if not groups:
        raise DataError(f"{policy_path} contains no rules")
    X = np.stack([featurize_rules(rules, emb, space) for _, rules in groups])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["example_id", "predicted_class", "rule_count"] + [f"score_{k}" for k in range(len(LABELS))])
    for (gid, rules), (pred, scores) in zip(groups, predict_with_report(model, X)):
        w.writerow([gid, pred, len(rules)] + [repr(s) for s in scores])
    return buf.getvalue()


__all__ = [
    "Run",
    "StageError",
    "Paths",
    "render_report",
    "load_metrics",
    "metrics_json",
    "predict_file",
    "group_by_components",
]
