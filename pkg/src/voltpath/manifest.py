"""Reproducibility manifest for pipeline runs."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from . import __version__
from .config import RunConfig

__all__ = ["RunManifest", "sha256_file", "build_manifest", "write_manifest"]


def sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass(frozen=True)
class RunManifest:
    seed: int
    config_digest: str
    input_digests: Mapping[str, str]
    tool_version: str
    record_counts: Mapping[str, int] = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "seed": self.seed,
            "config_digest": self.config_digest,
            "input_digests": dict(sorted(self.input_digests.items())),
            "tool_version": self.tool_version,
            "record_counts": dict(sorted(self.record_counts.items())),
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def build_manifest(config: RunConfig, record_counts: Mapping[str, int]) -> RunManifest:
    config_text = "\n".join(f"{k}={v}" for k, v in config.canonical_items())
    inputs = {}
    for path in (config.energy_csv, config.fleet_csv, config.population_csv, config.ba_map_csv):
        if path is not None and Path(path).exists():
            inputs[str(path)] = sha256_file(Path(path))
    return RunManifest(
        seed=config.seed,
        config_digest=hashlib.sha256(config_text.encode("utf-8")).hexdigest(),
        input_digests=inputs,
        tool_version=__version__,
        record_counts=dict(record_counts),
    )


def write_manifest(manifest: RunManifest, path: Path) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(manifest.to_json(), encoding="utf-8")
    tmp.replace(path)
