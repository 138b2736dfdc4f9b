"""Model serialization: ``mdl-v1`` JSON manifest + flat little-endian f32 blob."""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from ..errors import FormatVersionError, MissingInputError
from .model import ConvNet1d, ModelConfig

MDL_FORMAT = "mdl-v1"


def _paths(base: str | Path) -> tuple[Path, Path]:
    base = Path(base)
    if base.suffix in (".json", ".f32"):
        base = base.with_suffix("")
    return base.with_suffix(".json"), base.with_suffix(".f32")


def _tensor_dict(model: ConvNet1d) -> dict[str, np.ndarray]:
    tensors = dict(model.named_parameters())
    tensors.update(model.named_buffers())
    return tensors


def save_model(model: ConvNet1d, base: str | Path,
               provenance: dict | None = None) -> tuple[Path, Path]:
    """Write manifest + weight blob; tensor order follows the manifest."""
    json_path, blob_path = _paths(base)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    tensors = _tensor_dict(model)
    entries = []
    offset = 0
    chunks = []
    for name in sorted(tensors):
        arr = tensors[name].astype("<f4")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        offset += arr.nbytes
        chunks.append(arr.tobytes())
    manifest = {
        "format": MDL_FORMAT,
        "config": asdict(model.cfg),
        "provenance": provenance or {},
        "tensors": entries,
    }
    json_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    blob_path.write_bytes(b"".join(chunks))
    return json_path, blob_path


def load_model(base: str | Path, dtype=np.float32) -> tuple[ConvNet1d, dict]:
    """Rebuild the model from disk; returns it with the manifest.

    Weights are stored as float32, so that is the natural compute dtype."""
    json_path, blob_path = _paths(base)
    if not json_path.exists() or not blob_path.exists():
        raise MissingInputError(f"model files not found for base {json_path.with_suffix('')}")
    manifest = json.loads(json_path.read_text())
    if manifest.get("format") != MDL_FORMAT:
        raise FormatVersionError(
            f"{json_path}: expected format {MDL_FORMAT!r}, found {manifest.get('format')!r}"
        )
    cfg = ModelConfig(**manifest["config"])
    model = ConvNet1d(cfg, np.random.default_rng(0), dtype=dtype)
    blob = blob_path.read_bytes()
    tensors = _tensor_dict(model)
    for entry in manifest["tensors"]:
        name = entry["name"]
        if name not in tensors:
            raise FormatVersionError(f"{json_path}: unknown tensor {name!r}")
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        data = np.frombuffer(blob, dtype="<f4", count=count, offset=entry["offset"])
        target = tensors[name]
        if target.shape != shape:
            raise FormatVersionError(
                f"{json_path}: tensor {name!r} shape {shape} != expected {target.shape}"
            )
        target[...] = data.reshape(shape)
    return model, manifest
