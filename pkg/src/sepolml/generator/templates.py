"""Scenario templates: one builder per violation label.

Every builder receives a fresh integer index, so the names it produces never
collide with another example's, and returns ``(rules, instance_names)``.
"""

from __future__ import annotations

import random

from ..errors import DataError
from ..parser import AllowRule, TypeTransitionRule
from .pools import GeneratorConfig, instance

HARMLESS_FILE_PERMS = ("getattr", "open", "ioctl", "lock")


class PoolExhausted(DataError):
    pass


class _Builder:
    def __init__(self, cfg: GeneratorConfig, rng: random.Random, index: int, ordinal: int):
        self.cfg = cfg
        self.rng = rng
        self.i = index
        # position of this example among examples of the same label
        self.ordinal = ordinal
        self.rules = []
        self.names = {}
        self.subject = None

    # -- helpers ---------------------------------------------------------------

    def pick(self, pool, k=1):
        if len(pool) < k:
            raise PoolExhausted(f"need {k} distinct entries from a pool of {len(pool)}")
        picked = self.rng.sample(list(pool), k)
        return picked[0] if k == 1 else picked

    def name(self, canonical_name, role=None):
        return instance(canonical_name, self.i, role)

    def file_perms(self, *core, extra=1):
        perms = list(core)
        for p in self.rng.sample(HARMLESS_FILE_PERMS, self.rng.randint(0, extra)):
            if p not in perms:
                perms.append(p)
        return perms

    def allow(self, source, target, cls, perms):
        self.rules.append(AllowRule(source, target, cls, tuple(dict.fromkeys(perms))))

    def type_transition(self, source, target, new):
        self.rules.append(TypeTransitionRule(source, target, "process", new))

    def service_transition(self, source, daemon, omit=None):
        """Domain-transition scaffolding; ``omit`` drops one of the three allow rules."""
        exe = instance(daemon, self.i, "exec")
        if omit != "execute":
            self.allow(source, exe, "file", self.file_perms("execute", "read", extra=1))
        if omit != "transition":
            self.allow(source, instance(daemon, self.i), "process", ["transition"])
        if omit != "entrypoint":
            self.allow(instance(daemon, self.i), exe, "file", ["entrypoint"])
        self.type_transition(source, exe, instance(daemon, self.i))

    def filler(self):
        """A domain reading its own configuration; matches no pattern."""
        if self.subject is None or len(self.rules) >= 6:
            return
        if self.rng.random() < self.cfg.filler_rate:
            conf = self.subject[:-2] + "_conf_t"
            self.allow(self.subject, conf, "file", self.file_perms("read", extra=2))

    # -- label 0 ---------------------------------------------------------------

    def benign(self):
        shape = self.rng.randrange(5)
        cfg = self.cfg
        if shape == 0:
            web = self.pick(cfg.web_domains)
            s, content = self.name(web), self.name(web, "content")
            self.allow(s, content, "file", self.file_perms("read", "getattr", "open"))
            self.allow(s, content, "dir", ["search", "getattr"])
            self.names[content] = f"/var/www/{s[:-2]}"
            self.subject = s
        elif shape == 1:
            (d0, o0), (d1, o1) = self.pick(cfg.sensitive_data, 2)
            self.allow(self.name(o0), self.name(d0), "file", self.file_perms("read", "write"))
            self.allow(self.name(o1), self.name(d1), "file", [self.rng.choice(["write", "append"])])
            self.subject = self.name(o0)
        elif shape == 2:
            web = self.pick(cfg.web_domains)
            s, log = self.name(web), self.name(web, "log")
            self.allow(s, self.name(web, "port"), self.rng.choice(cfg.network_classes), ["name_bind"])
            self.allow(s, log, "file", self.file_perms("append", "create", "open"))
            self.names[log] = f"/var/log/{s[:-2]}"
            self.subject = s
        elif shape == 3:
            daemon, resource = self.pick(cfg.system_processes)
            self.service_transition(self.name(cfg.transition_source), daemon)
            self.allow(self.name(daemon), self.name(resource), "file", self.file_perms("read", "append"))
        else:
            web = self.pick(cfg.web_domains)
            s = self.name(web)
            caps = self.rng.sample(cfg.benign_capabilities, self.rng.randint(1, 2))
            self.allow(s, s, "capability", caps)
            self.allow(s, self.name(web, "conf"), "file", self.file_perms("read", "getattr"))
            self.subject = s

    # -- violations ----------------------------------------------------------------

    def sod_read_write(self):
        cfg = self.cfg
        if self.rng.random() < 0.5:
            # an owner reaching into someone else's sensitive data
            (d0, o0), (d1, _) = self.pick(cfg.sensitive_data, 2)
            owner = self.name(o0)
            self.allow(owner, self.name(d0), "file", self.file_perms("read", "write"))
            self.allow(owner, self.name(d1), "file", self.file_perms("read", "write"))
            self.subject = owner
        else:
            web = self.pick(cfg.web_domains)
            data, _ = self.pick(cfg.sensitive_data)
            s = self.name(web)
            self.allow(s, self.name(data), "file", self.file_perms("read", "write", extra=2))
            self.subject = s

    def improper_privilege(self):
        user = self.pick(self.cfg.low_privilege_domains)
        u = self.name(user)
        self.allow(u, u, "capability", self.rng.sample(self.cfg.privileged_permissions, self.rng.randint(1, 2)))
        if self.rng.random() < 0.5:
            self.allow(u, self.name(user, "home"), "file", self.file_perms("read", "write", "getattr"))
        self.subject = u

    def critical_file_modification(self):
        web = self.pick(self.cfg.web_domains)
        s = self.name(web)
        extra = self.rng.sample(["unlink", "rename", "append"], self.rng.randint(0, 2))
        self.allow(s, self.name(self.pick(self.cfg.critical_files)), "file", ["write", "setattr"] + extra)
        if self.rng.random() < 0.5:
            self.allow(s, self.name(web, "content"), "file", self.file_perms("read", "getattr"))
        self.subject = s

    def incorrect_type_usage(self):
        cfg = self.cfg
        web = self.pick(cfg.web_domains)
        s = self.name(web)
        variant = self.ordinal % 3
        if variant == 0:
            # a binary's type used as a socket
            perms = ["bind", "listen"] + self.rng.sample(["accept", "getopt"], self.rng.randint(0, 1))
            self.allow(s, self.name(web, "exec"), self.rng.choice(cfg.network_classes), perms)
        elif variant == 1:
            # a port type used as a file
            self.allow(s, self.name(web, "port"), "file", self.file_perms("read", "map"))
        else:
            # user data run as a program
            home = self.name(self.pick(cfg.low_privilege_domains), "home")
            self.allow(s, home, "file", ["execute", "entrypoint"])
        self.subject = s

    def domain_transition(self):
        cfg = self.cfg
        daemon = self.pick([d for d, _ in cfg.system_processes] + list(cfg.web_domains))
        omit = ("entrypoint", "execute", "transition")[self.ordinal % 3]
        self.service_transition(self.name(cfg.transition_source), daemon, omit=omit)

    def mislabeled(self):
        cfg = self.cfg
        web = self.pick(cfg.web_domains)
        s = self.name(web)
        # role suffix the object carries vs the directory it actually lives in
        role, path = self.rng.choice([
            ("content", f"/var/log/{s[:-2]}/access_log"),
            ("log", f"/var/www/{s[:-2]}/index.html"),
            ("tmp", f"/etc/{s[:-2]}/{s[:-2]}.conf"),
            ("conf", f"/usr/sbin/{s[:-2]}"),
        ])
        obj = self.name(web, role)
        self.allow(s, obj, "file", self.file_perms("append", "create", extra=1))
        self.allow(s, obj, "dir", ["search", "add_name", "write"])
        self.names[obj] = path
        self.subject = s

    def unauthorized_network(self):
        cfg = self.cfg
        tool = self.pick(cfg.non_network_domains)
        n = self.name(tool)
        port = self.name(self.pick(cfg.web_domains), "port")
        self.allow(n, port, self.rng.choice(cfg.network_classes), ["name_connect"])
        if self.rng.random() < 0.5:
            self.allow(n, self.name(tool, "log"), "file", self.file_perms("append", "create"))
        self.subject = n

    def sod_exclusive_roles(self):
        a, b = self.pick(self.cfg.exclusive_pairs)
        s = self.name(self.pick(self.cfg.web_domains))
        if self.rng.random() < 0.5:
            # entering both role domains
            self.allow(s, self.name(a), "process", ["transition"])
            self.allow(s, self.name(b), "process", ["transition"])
        else:
            self.allow(s, self.name(a), "file", self.file_perms("write", "lock", extra=1))
            self.allow(s, self.name(b), "file", self.file_perms("write", "lock", extra=1))
        self.subject = s

    def contradictory_transitions(self):
        cfg = self.cfg
        d1, d2 = self.pick([d for d, _ in cfg.system_processes] + list(cfg.web_domains), 2)
        src = self.name(cfg.transition_source)
        exe = self.name(d1, "exec")
        self.type_transition(src, exe, self.name(d1))
        self.type_transition(src, exe, self.name(d2))

    def missing_file_access(self):
        daemon, _ = self.pick(self.cfg.system_processes)
        self.service_transition(self.name(self.cfg.transition_source), daemon)


BUILDERS = {
    0: _Builder.benign,
    1: _Builder.sod_read_write,
    2: _Builder.improper_privilege,
    3: _Builder.critical_file_modification,
    4: _Builder.incorrect_type_usage,
    5: _Builder.domain_transition,
    6: _Builder.mislabeled,
    7: _Builder.unauthorized_network,
    8: _Builder.sod_exclusive_roles,
    9: _Builder.contradictory_transitions,
    10: _Builder.missing_file_access,
}


def build_rules(label: int, cfg: GeneratorConfig, rng: random.Random, index: int, ordinal: int = 0):
    if index > cfg.max_index:
        raise PoolExhausted(f"name index {index} exceeds max_index={cfg.max_index}")
    b = _Builder(cfg, rng, index, ordinal)
    BUILDERS[int(label)](b)
    b.filler()
    return tuple(b.rules), b.names
