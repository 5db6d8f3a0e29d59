"""Run manifests: what ran, on which inputs, producing which artifacts.

One JSON line per run, appended to a manifest file. Timestamps live only
here; artifact files themselves stay byte-deterministic.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def new_run_id(command: str) -> str:
    return time.strftime("%Y%m%dT%H%M%S", time.gmtime()) + "-" + command


@dataclass
class RunManifest:
    run_id: str
    command: str
    task_id: str | None
    config_hash: str
    inputs: dict[str, str] = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)
    created: str = ""

    def add_input(self, path) -> None:
        self.inputs[str(path)] = file_digest(path)

    def add_artifact(self, path) -> None:
        self.artifacts.append(str(path))


def append_manifest(manifest: RunManifest, path) -> None:
    """Validate artifact existence, stamp the time, append one JSON line."""
    for artifact in manifest.artifacts:
        if not Path(artifact).exists():
            raise ValueError(f"manifest lists missing artifact: {artifact}")
    if not manifest.created:
        manifest.created = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    record = {
        "run_id": manifest.run_id,
        "command": manifest.command,
        "task_id": manifest.task_id,
        "config_hash": manifest.config_hash,
        "inputs": manifest.inputs,
        "artifacts": manifest.artifacts,
        "created": manifest.created,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(record, sort_keys=True) + "\n")
