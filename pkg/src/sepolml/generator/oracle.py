"""Deterministic pattern matcher that re-derives violation labels from rule text.

Each matcher looks at one rule group (plus optional object instance names)
and answers whether its violation pattern is present. :func:`baseline_detect`
tries them in a fixed priority order and returns the first hit.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping

from ..dataset import LabeledExample, ViolationLabel
from ..parser import AllowRule, Rule, TypeTransitionRule
from .pools import (
    CAPABILITY_CLASSES,
    FILE_CLASSES,
    FILE_SUFFIXES,
    PORT_SUFFIX,
    SOCKET_CLASSES,
    USER_DATA_SUFFIXES,
    WRITE_PERMISSIONS,
    GeneratorConfig,
    canonical,
    instance,
)

PRIORITY = (9, 5, 1, 8, 3, 7, 2, 4, 6, 10)
DEFAULT_CONFIG = GeneratorConfig()


class _Facts:
    """Indexed view of one rule group."""

    def __init__(self, rules: Iterable[Rule], instance_names: Mapping[str, str] | None):
        self.allows: dict[tuple[str, str, str], set[str]] = defaultdict(set)
        self.transitions: list[TypeTransitionRule] = []
        for r in rules:
            if isinstance(r, AllowRule):
                self.allows[(r.source, r.target, r.security_class)].update(r.permissions)
            elif isinstance(r, TypeTransitionRule):
                self.transitions.append(r)
        self.instance_names = dict(instance_names or {})
        new_types = defaultdict(set)
        for t in self.transitions:
            new_types[(t.source_domain, t.target_type, t.security_class)].add(t.new_type)
        self.conflicting = {k for k, v in new_types.items() if len(v) > 1}

    def perms(self, source, target, cls) -> set[str]:
        return self.allows.get((source, target, cls), set())

    def unambiguous_transitions(self):
        for t in self.transitions:
            key = (t.source_domain, t.target_type, t.security_class)
            if t.security_class == "process" and key not in self.conflicting:
                yield t

    def transition_gaps(self, t: TypeTransitionRule) -> list[str]:
        src, exe, new = t.source_domain, t.target_type, t.new_type
        gaps = []
        if "entrypoint" not in self.perms(new, exe, "file"):
            gaps.append("entrypoint")
        if "execute" not in self.perms(src, exe, "file"):
            gaps.append("execute")
        if "transition" not in self.perms(src, new, "process"):
            gaps.append("transition")
        return gaps


def contradictory_transitions(f: _Facts, cfg: GeneratorConfig) -> bool:
    return bool(f.conflicting)


def domain_transition_issue(f: _Facts, cfg: GeneratorConfig) -> bool:
    return any(f.transition_gaps(t) for t in f.unambiguous_transitions())


def sod_read_write(f: _Facts, cfg: GeneratorConfig) -> bool:
    owners = cfg.sensitive_owner
    for (src, tgt, cls), perms in f.allows.items():
        if cls not in FILE_CLASSES or not {"read", "write"} <= perms:
            continue
        data, idx = canonical(tgt)
        if data not in owners:
            continue
        if canonical(src) != (owners[data], idx):
            return True
    return False


def sod_exclusive_roles(f: _Facts, cfg: GeneratorConfig) -> bool:
    reach = defaultdict(set)
    for src, tgt, _ in f.allows:
        reach[src].add(canonical(tgt))
    for targets in reach.values():
        for a, b in cfg.exclusive_pairs:
            if any((a, i) in targets and (b, i) in targets for _, i in targets):
                return True
    return False


def critical_file_modification(f: _Facts, cfg: GeneratorConfig) -> bool:
    critical = set(cfg.critical_files)
    system = set(cfg.system_domains)
    for (src, tgt, cls), perms in f.allows.items():
        if (
            cls in FILE_CLASSES
            and canonical(tgt)[0] in critical
            and perms & WRITE_PERMISSIONS
            and canonical(src)[0] not in system
        ):
            return True
    return False


def unauthorized_network(f: _Facts, cfg: GeneratorConfig) -> bool:
    capable = cfg.network_capable
    for (src, _, cls), perms in f.allows.items():
        if cls in cfg.network_classes and "name_connect" in perms and canonical(src)[0] not in capable:
            return True
    return False


def improper_privilege(f: _Facts, cfg: GeneratorConfig) -> bool:
    low = set(cfg.low_privilege_domains)
    privileged = set(cfg.privileged_permissions)
    for (src, _, cls), perms in f.allows.items():
        if cls in CAPABILITY_CLASSES and perms & privileged and canonical(src)[0] in low:
            return True
    return False


def incorrect_type_usage(f: _Facts, cfg: GeneratorConfig) -> bool:
    for (_, tgt, cls), perms in f.allows.items():
        name = canonical(tgt)[0]
        if name.endswith(FILE_SUFFIXES) and (cls in SOCKET_CLASSES or cls == "process"):
            return True
        if name.endswith(PORT_SUFFIX) and cls in FILE_CLASSES:
            return True
        if name.endswith(USER_DATA_SUFFIXES) and perms & {"entrypoint", "execute"}:
            return True
    return False


def mislabeled(f: _Facts, cfg: GeneratorConfig) -> bool:
    targets = {tgt for _, tgt, _ in f.allows} | {t.target_type for t in f.transitions}
    for type_name, path in f.instance_names.items():
        if type_name not in targets:
            continue
        for prefix, suffix in cfg.path_conventions:
            if path.startswith(prefix) and not canonical(type_name)[0].endswith(suffix):
                return True
    return False


def missing_file_access(f: _Facts, cfg: GeneratorConfig) -> bool:
    resources = cfg.required_resource
    for t in f.unambiguous_transitions():
        if f.transition_gaps(t):
            continue
        daemon, idx = canonical(t.new_type)
        if daemon not in resources:
            continue
        needed = instance(resources[daemon], idx)
        if not any(src == t.new_type and tgt == needed for src, tgt, _ in f.allows):
            return True
    return False


MATCHERS = {
    9: contradictory_transitions,
    5: domain_transition_issue,
    1: sod_read_write,
    8: sod_exclusive_roles,
    3: critical_file_modification,
    7: unauthorized_network,
    2: improper_privilege,
    4: incorrect_type_usage,
    6: mislabeled,
    10: missing_file_access,
}


def _facts(ex, instance_names):
    if isinstance(ex, LabeledExample):
        return _Facts(ex.rules, {**ex.instance_names, **(instance_names or {})})
    return _Facts(ex, instance_names)


def matching_patterns(ex, cfg: GeneratorConfig = DEFAULT_CONFIG, instance_names=None) -> list[int]:
    """Every violation code whose pattern matches, in priority order."""
    f = _facts(ex, instance_names)
    return [code for code in PRIORITY if MATCHERS[code](f, cfg)]


def baseline_detect(ex, cfg: GeneratorConfig = DEFAULT_CONFIG, instance_names=None) -> ViolationLabel:
    """Label a rule group by the first matching pattern; 0 when nothing matches.

    ``ex`` is a :class:`LabeledExample` (its label is ignored) or any iterable
    of rules.
    """
    f = _facts(ex, instance_names)
    for code in PRIORITY:
        if MATCHERS[code](f, cfg):
            return ViolationLabel(code)
    return ViolationLabel.NO_ANOMALY
