"""Run manifests: every command writes one manifest.json into its output
directory recording the config hash, input checksums, and artifact checksums.

The created timestamp is informational; rerun comparisons use the checksum
maps, which are byte-stable for identical inputs and config.
"""

from __future__ import annotations

import datetime
import json
import os
from dataclasses import dataclass, field as dc_field

from .errors import InputError
from .util import canonical_json, sha256_of_bytes, sha256_of_file

TOOL_VERSION = "0.1.0"
MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    command: str
    config_hash: str
    inputs: dict[str, str] = dc_field(default_factory=dict)
    artifacts: dict[str, str] = dc_field(default_factory=dict)
    seed: int | None = None
    tool_version: str = TOOL_VERSION
    created_utc: str = ""

    def add_input(self, path: str) -> None:
        self.inputs[path] = sha256_of_file(path)

    def add_artifact(self, out_dir: str, path: str) -> None:
        rel = os.path.relpath(path, out_dir)
        self.artifacts[rel] = sha256_of_file(path)

    def write(self, out_dir: str) -> str:
        self.created_utc = datetime.datetime.now(datetime.timezone.utc).isoformat()
        payload = {
            "command": self.command,
            "tool_version": self.tool_version,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "created_utc": self.created_utc,
            "inputs": dict(sorted(self.inputs.items())),
            "artifacts": dict(sorted(self.artifacts.items())),
        }
        path = os.path.join(out_dir, MANIFEST_NAME)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def config_hash(config_dict: dict) -> str:
    return sha256_of_bytes(canonical_json(config_dict).encode("utf-8"))


def load_manifest(out_dir: str) -> dict:
    path = os.path.join(out_dir, MANIFEST_NAME)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read manifest {path}: {exc}") from None
