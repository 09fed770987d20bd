"""Balanced synthetic corpora of labeled policy examples."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from ..dataset import LABELS, LabeledDataset, LabeledExample, ViolationLabel, to_csv, to_json
from ..parser import (
    AttributeDecl,
    PolicyDocument,
    TypeDecl,
    TypeTransitionRule,
    rule_type_refs,
    serialize,
    serialize_statement,
)
from .oracle import MATCHERS, PRIORITY, baseline_detect, matching_patterns
from .pools import GeneratorConfig, canonical, instance
from .templates import PoolExhausted, build_rules

__all__ = [
    "GeneratorConfig", "PoolExhausted", "ValidationReport", "baseline_detect", "generate_dataset",
    "generate_example", "matching_patterns", "policy_text", "validate_dataset", "write_corpus",
    "MATCHERS", "PRIORITY",
]

ATTRIBUTES = ("domain", "file_type", "port_type")


def generate_example(label, cfg: GeneratorConfig, rng: random.Random, index: int = 1, ordinal: int = 0,
                     example_id: str | None = None) -> tuple[LabeledExample, list[TypeDecl]]:
    """One example of ``label`` using names suffixed with ``index``, plus its type declarations."""
    label = ViolationLabel(label)
    rules, names = build_rules(label, cfg, rng, index, ordinal)
    ex = LabeledExample(example_id or f"ex{index:04d}", rules, label, names)
    return ex, declarations_for(ex, cfg)


def declarations_for(ex: LabeledExample, cfg: GeneratorConfig) -> list[TypeDecl]:
    domains, others = [], []
    resources = cfg.required_resource
    for rule in ex.rules:
        refs = rule_type_refs(rule)
        if isinstance(rule, TypeTransitionRule):
            domains += [refs[0], refs[2]]
            others.append(refs[1])
            daemon, idx = canonical(rule.new_type)
            if daemon in resources:
                others.append(instance(resources[daemon], idx))
        else:
            domains.append(refs[0])
            others.append(refs[1])
    decls = {}
    for name in domains:
        decls.setdefault(name, "domain")
    for name in others:
        decls.setdefault(name, "port_type" if name.endswith("_port_t") else "file_type")
    return [TypeDecl(name, (attr,)) for name, attr in decls.items()]


def generate_dataset(cfg: GeneratorConfig) -> LabeledDataset:
    """``examples_per_label`` examples of every label, interleaved by label.

    Example ``k`` (0-based) uses name index ``k + 1``; the whole corpus is a
    pure function of ``cfg``.
    """
    rng = random.Random(cfg.seed)
    examples, decls = [], [AttributeDecl(a) for a in ATTRIBUTES]
    k = 0
    for rnd in range(cfg.examples_per_label):
        for label in LABELS:
            ex, ex_decls = generate_example(label, cfg, rng, index=k + 1, ordinal=rnd)
            examples.append(ex)
            decls.extend(ex_decls)
            k += 1
    return LabeledDataset(examples, PolicyDocument(tuple(decls), "<generated>"))


def policy_text(ds: LabeledDataset) -> str:
    """Declarations followed by every example's rules, each group introduced by a comment."""
    parts = [serialize(ds.declarations)]
    for ex in ds.examples:
        parts.append(f"# {ex.example_id} label={int(ex.label)}\n")
        parts.extend(serialize_statement(r) + "\n" for r in ex.rules)
    return "".join(parts)


@dataclass
class ValidationReport:
    total: int = 0
    disagreements: list[dict] = field(default_factory=list)

    @property
    def agreement(self) -> float:
        if self.total == 0:
            return 1.0
        return 1.0 - len(self.disagreements) / self.total

    @property
    def ok(self) -> bool:
        return not self.disagreements

    def to_dict(self) -> dict:
        return {"total": self.total, "agreement": self.agreement, "disagreements": self.disagreements}


def validate_dataset(ds: LabeledDataset, cfg: GeneratorConfig = GeneratorConfig()) -> ValidationReport:
    report = ValidationReport(total=len(ds))
    for ex in ds.examples:
        detected = baseline_detect(ex, cfg)
        if detected != ex.label:
            report.disagreements.append({
                "example_id": ex.example_id,
                "label": int(ex.label),
                "detected": int(detected),
                "rules": ex.rule_texts(),
            })
    return report


def write_corpus(ds: LabeledDataset, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"policy": out / "policy.te", "csv": out / "dataset.csv", "json": out / "dataset.json"}
    paths["policy"].write_text(policy_text(ds), encoding="utf-8")
    paths["csv"].write_text(to_csv(ds), encoding="utf-8")
    paths["json"].write_text(to_json(ds), encoding="utf-8")
    return paths
