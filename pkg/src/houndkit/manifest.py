"""Run manifests: per-stage provenance records with content hashes.

Every CLI stage writes ``<output base>.manifest.json`` listing the resolved
configuration, seed, input and output file hashes, and wall-clock timings.
File names are stored as basenames so two runs into different directories
produce comparable manifests; the ``timings`` entry is the only
run-dependent field.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .errors import MissingInputError, StrictHashError

MANIFEST_FORMAT = "run-manifest-v1"
MANIFEST_SUFFIX = ".manifest.json"


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def hash_files(paths) -> dict[str, str]:
    out = {}
    for p in paths:
        p = Path(p)
        if not p.exists():
            raise MissingInputError(f"missing file: {p}")
        out[p.name] = sha256_file(p)
    return out


def manifest_path(base: str | Path) -> Path:
    base = Path(base)
    if base.suffix in (".json", ".f32"):
        base = base.with_suffix("")
    return base.parent / (base.name + MANIFEST_SUFFIX)


def write_manifest(base: str | Path, stage: str, config: dict, seed: int,
                   inputs, outputs, timings: dict) -> Path:
    path = manifest_path(base)
    payload = {
        "format": MANIFEST_FORMAT,
        "stage": stage,
        "seed": seed,
        "config": config,
        "inputs": hash_files(inputs),
        "outputs": hash_files(outputs),
        "timings": timings,
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(base: str | Path) -> dict:
    path = manifest_path(base)
    if not path.exists():
        raise MissingInputError(f"manifest not found: {path}")
    return json.loads(path.read_text())


def verify_strict(input_paths) -> None:
    """Check each input against the manifest of the stage that produced it.

    A file is only checked when a sibling manifest exists and mentions it;
    any disagreement raises :class:`StrictHashError`.
    """
    by_dir: dict[Path, list[Path]] = {}
    for p in input_paths:
        p = Path(p)
        by_dir.setdefault(p.parent, []).append(p)
    for directory, files in by_dir.items():
        for mpath in sorted(directory.glob("*" + MANIFEST_SUFFIX)):
            recorded = json.loads(mpath.read_text()).get("outputs", {})
            for f in files:
                if f.name in recorded:
                    actual = sha256_file(f)
                    if actual != recorded[f.name]:
                        raise StrictHashError(
                            f"{f}: content hash {actual} does not match "
                            f"{recorded[f.name]} recorded in {mpath.name}"
                        )
