"""Run manifests: provenance and integrity for every output directory.

Each command writes exactly one ``manifest.json`` beside its data files,
recording the command, a digest of the effective configuration, the master
seed, the engine version, timestamps, and a sha256 digest per output file.
Reruns with the same configuration and seed produce byte-identical data
files; only the manifest's timestamps differ.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

MANIFEST_NAME = "manifest.json"


def config_digest(config: dict) -> str:
    """sha256 of the canonical JSON encoding of a configuration."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunManifest:
    command: str
    engine_version: str
    master_seed: int
    config_digest: str
    created_utc: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )
    finished_utc: str = ""
    outputs: list[dict] = field(default_factory=list)

    def add_output(self, out_dir: Path, path: Path) -> None:
        self.outputs.append(
            {
                "path": str(path.relative_to(out_dir)),
                "sha256": file_digest(path),
                "bytes": path.stat().st_size,
            }
        )

    def write(self, out_dir: Path) -> Path:
        self.finished_utc = datetime.now(timezone.utc).isoformat()
        target = out_dir / MANIFEST_NAME
        document = {
            "schema_version": 1,
            "command": self.command,
            "engine_version": self.engine_version,
            "master_seed": self.master_seed,
            "config_digest": self.config_digest,
            "created_utc": self.created_utc,
            "finished_utc": self.finished_utc,
            "outputs": self.outputs,
        }
        target.write_text(json.dumps(document, indent=2) + "\n")
        return target


def verify_manifest(out_dir: Path) -> list[str]:
    """Re-hash every listed output; returns a list of mismatch descriptions."""
    document = json.loads((out_dir / MANIFEST_NAME).read_text())
    problems = []
    for entry in document["outputs"]:
        path = out_dir / entry["path"]
        if not path.exists():
            problems.append(f"{entry['path']}: missing")
        elif file_digest(path) != entry["sha256"]:
            problems.append(f"{entry['path']}: digest mismatch")
    return problems
