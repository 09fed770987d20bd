"""Run manifest: per-stage content hashes of inputs and outputs."""

from __future__ import annotations

import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .errors import StaleArtifact

MANIFEST_NAME = "manifest.json"


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Manifest:
    def __init__(self, root, config: dict | None = None):
        self.root = Path(root)
        self.path = self.root / MANIFEST_NAME
        self.data = {"tool_version": __version__, "config": config or {}, "stages": {}}
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                old = json.load(fh)
            self.data["stages"] = old.get("stages", {})
            if config is None:
                self.data["config"] = old.get("config", {})

    def rel(self, path) -> str:
        p = Path(path)
        try:
            return p.resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            return str(p)

    def producer_of(self, path) -> str | None:
        key = self.rel(path)
        for stage, rec in self.data["stages"].items():
            if key in rec.get("outputs", {}):
                return stage
        return None

    def require(self, path, producer: str):
        """Fail unless ``path`` exists and still matches the hash its producer recorded."""
        p = Path(path)
        if not p.exists():
            raise StaleArtifact(p, producer)
        stage = self.producer_of(p)
        if stage is not None:
            recorded = self.data["stages"][stage]["outputs"][self.rel(p)]
            if recorded != file_hash(p):
                raise StaleArtifact(p, stage, reason="stale (modified since it was produced)")

    def record(self, stage: str, inputs, outputs, started: str):
        self.data["stages"][stage] = {
            "inputs": {self.rel(p): file_hash(p) for p in inputs},
            "outputs": {self.rel(p): file_hash(p) for p in outputs},
            "started": started,
            "finished": _now(),
        }
        self.save()

    def save(self):
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.path, "w", encoding="utf-8") as fh:
            json.dump(self.data, fh, indent=1, sort_keys=True)
            fh.write("\n")

    def hashes(self) -> dict:
        """Stage -> outputs map, i.e. the manifest without timestamps."""
        return {s: r["outputs"] for s, r in self.data["stages"].items()}


now = _now
