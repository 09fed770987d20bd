"""Violation labels and labeled policy examples, plus their on-disk formats."""

from __future__ import annotations

import csv
import enum
import io
import json
from collections import Counter
from dataclasses import dataclass, field

from .errors import DataError
from .parser import AllowRule, PolicyDocument, Rule, TypeTransitionRule, parse_document, serialize_statement

MAX_RULES = 6
CSV_HEADER = ["example_id", "rule_index", "rule_text", "violation_class"]
DATASET_SCHEMA = 1


class ViolationLabel(enum.IntEnum):
    NO_ANOMALY = 0
    SOD_READ_WRITE = 1
    IMPROPER_PRIVILEGE = 2
    CRITICAL_FILE_MODIFICATION = 3
    INCORRECT_TYPE_USAGE = 4
    DOMAIN_TRANSITION = 5
    MISLABELED = 6
    UNAUTHORIZED_NETWORK = 7
    SOD_EXCLUSIVE_ROLES = 8
    CONTRADICTORY_TRANSITIONS = 9
    MISSING_FILE_ACCESS = 10

    @property
    def description(self) -> str:
        return DESCRIPTIONS[self]


DESCRIPTIONS = {
    ViolationLabel.NO_ANOMALY: "No anomalies",
    ViolationLabel.SOD_READ_WRITE:
        "Separation of Duty (SoD) violation - single subject with read and write access to sensitive data",
    ViolationLabel.IMPROPER_PRIVILEGE: "Improper privilege assignment",
    ViolationLabel.CRITICAL_FILE_MODIFICATION: "Critical system file modification",
    ViolationLabel.INCORRECT_TYPE_USAGE: "Incorrect type usage",
    ViolationLabel.DOMAIN_TRANSITION: "Domain transition issues",
    ViolationLabel.MISLABELED: "Mislabeled files or processes",
    ViolationLabel.UNAUTHORIZED_NETWORK: "Unauthorized network access",
    ViolationLabel.SOD_EXCLUSIVE_ROLES:
        "Separation of Duty (SoD) violation - single subject with access to multiple mutually exclusive roles",
    ViolationLabel.CONTRADICTORY_TRANSITIONS: "Contradictory type transitions for the same process",
    ViolationLabel.MISSING_FILE_ACCESS: "Missing necessary file access for system processes",
}

LABELS = tuple(ViolationLabel)
N_LABELS = len(LABELS)


@dataclass(frozen=True)
class LabeledExample:
    example_id: str
    rules: tuple[Rule, ...]
    label: ViolationLabel
    # object type -> instance name (e.g. a file path); only some examples carry one
    instance_names: dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not 1 <= len(self.rules) <= MAX_RULES:
            raise ValueError(f"{self.example_id}: {len(self.rules)} rules, expected 1..{MAX_RULES}")
        object.__setattr__(self, "label", ViolationLabel(self.label))

    def rule_texts(self) -> list[str]:
        return [serialize_statement(r) for r in self.rules]


@dataclass
class LabeledDataset:
    examples: list[LabeledExample]
    declarations: PolicyDocument = field(default_factory=PolicyDocument)

    def __post_init__(self):
        ids = [ex.example_id for ex in self.examples]
        if len(set(ids)) != len(ids):
            dup = next(i for i, c in Counter(ids).items() if c > 1)
            raise DataError(f"duplicate example id {dup!r}")

    def __len__(self):
        return len(self.examples)

    def __iter__(self):
        return iter(self.examples)

    @property
    def label_counts(self) -> dict[int, int]:
        c = Counter(int(ex.label) for ex in self.examples)
        return {int(lbl): c.get(int(lbl), 0) for lbl in LABELS}

    @property
    def labels(self) -> list[int]:
        return [int(ex.label) for ex in self.examples]

    def instance_names(self) -> dict[str, str]:
        out = {}
        for ex in self.examples:
            out.update(ex.instance_names)
        return out

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset([self.examples[i] for i in indices], self.declarations)


def _parse_rule(text: str) -> Rule:
    doc = parse_document(text)
    if len(doc.statements) != 1 or not isinstance(doc.statements[0], (AllowRule, TypeTransitionRule)):
        raise DataError(f"expected exactly one rule, got {text!r}")
    return doc.statements[0]


def to_csv(ds: LabeledDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for ex in ds.examples:
        for i, text in enumerate(ex.rule_texts()):
            w.writerow([ex.example_id, i, text, int(ex.label)])
    return buf.getvalue()


def from_csv(text: str) -> LabeledDataset:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise DataError(f"dataset CSV must start with header {','.join(CSV_HEADER)}")
    grouped: dict[str, list] = {}
    labels: dict[str, int] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise DataError(f"CSV line {lineno}: expected 4 fields")
        ex_id, idx, rule_text, label = row
        grouped.setdefault(ex_id, []).append((int(idx), _parse_rule(rule_text)))
        if labels.setdefault(ex_id, int(label)) != int(label):
            raise DataError(f"CSV line {lineno}: label differs from earlier rows of {ex_id}")
    examples = [
        LabeledExample(ex_id, tuple(r for _, r in sorted(rules, key=lambda t: t[0])), labels[ex_id])
        for ex_id, rules in grouped.items()
    ]
    return LabeledDataset(examples)


def to_json(ds: LabeledDataset) -> str:
    from .parser import serialize

    doc = {
        "schema": DATASET_SCHEMA,
        "declarations": serialize(ds.declarations),
        "examples": [
            {
                "example_id": ex.example_id,
                "label": int(ex.label),
                "rules": ex.rule_texts(),
                "instance_names": dict(sorted(ex.instance_names.items())),
            }
            for ex in ds.examples
        ],
    }
    return json.dumps(doc, indent=1) + "\n"


def from_json(text: str) -> LabeledDataset:
    doc = json.loads(text)
    if doc.get("schema") != DATASET_SCHEMA:
        raise DataError(f"unsupported dataset schema {doc.get('schema')!r}")
    examples = [
        LabeledExample(
            rec["example_id"],
            tuple(_parse_rule(t) for t in rec["rules"]),
            rec["label"],
            dict(rec.get("instance_names", {})),
        )
        for rec in doc["examples"]
    ]
    return LabeledDataset(examples, parse_document(doc.get("declarations", "")))


def load_dataset(path) -> LabeledDataset:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if str(path).endswith(".csv"):
        return from_csv(text)
    return from_json(text)
