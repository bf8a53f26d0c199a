"""Output files and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
from dataclasses import dataclass, field

from . import __version__

MANIFEST = "manifest.json"


def sha256_of(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalars
        return _jsonable(obj.item())
    return obj


@dataclass
class OutputDir:
    """Collects the files a run writes so the manifest can list them all."""

    root: str
    formats: tuple = ("csv", "json")
    files: list = field(default_factory=list)

    def __post_init__(self):
        os.makedirs(self.root, exist_ok=True)

    def path(self, name: str) -> str:
        return os.path.join(self.root, name)

    def _register(self, name):
        if name not in self.files:
            self.files.append(name)

    def write_json(self, name: str, data):
        if "json" not in self.formats:
            return None
        with open(self.path(name), "w") as fh:
            json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
            fh.write("\n")
        self._register(name)
        return self.path(name)

    def write_csv(self, name: str, header, rows):
        if "csv" not in self.formats:
            return None
        with open(self.path(name), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
        self._register(name)
        return self.path(name)

    def adopt(self, name: str):
        """Register a file written by another module's own writer."""
        self._register(name)
        return self.path(name)

    def write_manifest(self, *, scenario: str, config: dict, seed: int, duration: float,
                       summary: dict | None = None) -> dict:
        manifest = {
            "scenario": scenario,
            "version": __version__,
            "seed": seed,
            "config": config,
            "duration_s": duration,
            "files": [{"name": n, "sha256": sha256_of(self.path(n))} for n in sorted(self.files)],
        }
        if summary is not None:
            manifest["summary"] = summary
        with open(self.path(MANIFEST), "w") as fh:
            json.dump(_jsonable(manifest), fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest


def verify_manifest(root: str) -> list[str]:
    """Names of listed files whose digest no longer matches."""
    with open(os.path.join(root, MANIFEST)) as fh:
        manifest = json.load(fh)
    return [f["name"] for f in manifest["files"]
            if sha256_of(os.path.join(root, f["name"])) != f["sha256"]]
