"""Run manifests: a verifiable record of how each artifact was made.

A manifest echoes the full configuration (seeds, grids, metric) and the
64-bit content hash of each output file, so a run can be verified or
regenerated byte-for-byte.  Timestamps are informational; determinism
claims are about the hashed data files, not the manifest itself.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

TOOL_VERSION = "0.1.0"


def content_hash64(data: bytes) -> str:
    return hashlib.blake2b(data, digest_size=8).hexdigest()


def hash_file(path) -> str:
    return content_hash64(Path(path).read_bytes())


@dataclass
class RunManifest:
    command: str
    config: dict
    tool_version: str = TOOL_VERSION
    created_utc: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    files: dict = field(default_factory=dict)
    warnings: dict = field(default_factory=dict)

    def add_file(self, path) -> str:
        path = Path(path)
        digest = hash_file(path)
        self.files[path.name] = {"hash64": digest, "bytes": path.stat().st_size}
        return digest

    def add_warning(self, key: str, value) -> None:
        self.warnings[key] = value

    def to_json_dict(self) -> dict:
        return {
            "tool_version": self.tool_version,
            "command": self.command,
            "created_utc": self.created_utc,
            "config": self.config,
            "files": self.files,
            "warnings": self.warnings,
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2, sort_keys=True) + "\n")


def load_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
