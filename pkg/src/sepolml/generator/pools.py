"""Name pools and naming conventions shared by the generator and the oracle.

Pool entries are canonical type names such as ``httpd_t``. Generated names
carry a per-example index spliced in before the role suffix, e.g. example 7
turns ``httpd_t`` into ``httpd7_t`` and its log type into ``httpd7_log_t``.
:func:`canonical` undoes that, so pool entries must not contain digits.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ConfigError

_DIGITS = re.compile(r"\d+")

FILE_CLASSES = frozenset({"file", "dir", "lnk_file"})
SOCKET_CLASSES = frozenset({"tcp_socket", "udp_socket", "unix_stream_socket"})
CAPABILITY_CLASSES = frozenset({"capability", "capability2"})
WRITE_PERMISSIONS = frozenset({"write", "append", "setattr", "unlink", "rename", "create"})
# role suffixes that mark a type as on-disk data; never valid on sockets or processes
FILE_SUFFIXES = ("_exec_t", "_log_t", "_content_t", "_data_t", "_tmp_t", "_conf_t", "_home_t")
USER_DATA_SUFFIXES = ("_home_t",)
PORT_SUFFIX = "_port_t"


def canonical(name: str) -> tuple[str, str]:
    """Split a generated name into (canonical name, index string)."""
    m = _DIGITS.search(name)
    if m is None:
        return name, ""
    return name[: m.start()] + name[m.end():], m.group()


def stem(canonical_name: str) -> str:
    if not canonical_name.endswith("_t"):
        raise ValueError(f"type names end in _t: {canonical_name!r}")
    return canonical_name[:-2]


def instance(canonical_name: str, index, role: str | None = None) -> str:
    """``instance("httpd_t", 7, "log") == "httpd7_log_t"``."""
    base = f"{stem(canonical_name)}{index}"
    return f"{base}_{role}_t" if role else f"{base}_t"


@dataclass(frozen=True)
class GeneratorConfig:
    examples_per_label: int = 41
    seed: int = 42
    # chance of appending one harmless configuration-read rule to an example
    filler_rate: float = 0.2
    max_index: int = 99_999

    web_domains: tuple[str, ...] = (
        "httpd_t", "nginx_t", "mysqld_t", "postgresql_t", "tomcat_t", "php_fpm_t",
    )
    system_domains: tuple[str, ...] = ("init_t", "rpm_t", "useradd_t", "passwd_t")
    low_privilege_domains: tuple[str, ...] = ("user_t", "guest_t", "xguest_t", "staff_t")
    non_network_domains: tuple[str, ...] = (
        "logrotate_t", "backup_t", "mandb_t", "tmpreaper_t", "print_spool_t",
    )
    # sensitive data type -> the one domain that may both read and write it
    sensitive_data: tuple[tuple[str, str], ...] = (
        ("financial_data_t", "financial_process_t"),
        ("audit_log_t", "audit_process_t"),
        ("payroll_data_t", "payroll_process_t"),
        ("customer_pii_t", "crm_process_t"),
        ("medical_record_t", "ehr_process_t"),
        ("credit_card_t", "payment_process_t"),
    )
    critical_files: tuple[str, ...] = (
        "shadow_t", "passwd_file_t", "sudoers_t", "boot_t", "kernel_module_t", "etc_security_t",
    )
    exclusive_pairs: tuple[tuple[str, str], ...] = (
        ("payment_submit_t", "payment_approve_t"),
        ("code_commit_t", "code_deploy_t"),
        ("account_create_t", "account_audit_t"),
        ("purchase_order_t", "invoice_approve_t"),
        ("grade_entry_t", "grade_review_t"),
    )
    # system daemon -> resource it cannot run without
    system_processes: tuple[tuple[str, str], ...] = (
        ("syslogd_t", "var_log_t"),
        ("crond_t", "cron_spool_t"),
        ("sshd_t", "sshd_key_t"),
        ("named_t", "named_zone_t"),
        ("ntpd_t", "ntp_drift_t"),
        ("auditd_t", "auditd_rules_t"),
    )
    network_classes: tuple[str, ...] = ("tcp_socket", "udp_socket")
    privileged_permissions: tuple[str, ...] = (
        "sys_admin", "sys_module", "sys_rawio", "sys_ptrace", "dac_override", "setuid", "net_admin",
    )
    benign_capabilities: tuple[str, ...] = ("net_bind_service", "chown", "kill", "fowner")
    # path prefix -> role suffix a type labelling that path must carry
    path_conventions: tuple[tuple[str, str], ...] = (
        ("/var/log/", "_log_t"),
        ("/var/www/", "_content_t"),
        ("/usr/sbin/", "_exec_t"),
        ("/etc/", "_conf_t"),
        ("/tmp/", "_tmp_t"),
    )
    transition_source: str = "init_t"

    def __post_init__(self):
        if self.examples_per_label < 1:
            raise ConfigError("examples_per_label must be positive")
        if not 0.0 <= self.filler_rate <= 1.0:
            raise ConfigError("filler_rate must lie in [0, 1]")
        pools = {
            "web_domains": self.web_domains,
            "system_domains": self.system_domains,
            "low_privilege_domains": self.low_privilege_domains,
            "non_network_domains": self.non_network_domains,
            "sensitive_data": [n for pair in self.sensitive_data for n in pair],
            "critical_files": self.critical_files,
            "exclusive_pairs": [n for pair in self.exclusive_pairs for n in pair],
            "system_processes": [n for pair in self.system_processes for n in pair],
            "network_classes": self.network_classes,
            "privileged_permissions": self.privileged_permissions,
            "path_conventions": self.path_conventions,
        }
        seen: dict[str, str] = {}
        for pool, names in pools.items():
            if not names:
                raise ConfigError(f"pool {pool} is empty")
            if pool in ("network_classes", "privileged_permissions", "path_conventions"):
                continue
            for name in names:
                if _DIGITS.search(name) or not name.endswith("_t"):
                    raise ConfigError(f"{pool}: {name!r} must be digit-free and end in _t")
                if name in seen:
                    raise ConfigError(f"{name!r} appears in both {seen[name]} and {pool}")
                seen[name] = pool
        if self.transition_source not in self.system_domains:
            raise ConfigError("transition_source must be one of system_domains")
        if set(self.privileged_permissions) & set(self.benign_capabilities):
            raise ConfigError("benign capabilities overlap privileged permissions")

    # lookups used by the oracle
    @property
    def sensitive_owner(self) -> dict[str, str]:
        return dict(self.sensitive_data)

    @property
    def required_resource(self) -> dict[str, str]:
        return dict(self.system_processes)

    @property
    def network_capable(self) -> frozenset[str]:
        return frozenset(self.web_domains) | {d for d, _ in self.system_processes}

    @classmethod
    def from_dict(cls, data: dict) -> "GeneratorConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown generator settings: {sorted(unknown)}")
        kwargs = {}
        for k, v in data.items():
            if isinstance(v, list):
                v = tuple(tuple(x) if isinstance(x, list) else x for x in v)
            kwargs[k] = v
        return cls(**kwargs)
