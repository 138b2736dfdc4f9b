"""Balanced three-class window dataset construction.

Converts cipher traces (with known CP positions) plus one noise trace into
labeled N-sample windows, balances the classes to the minority size, and
assigns stratified 80/10/10 train/valid/test splits.  Datasets persist in
the ``wds-v1`` layout: a JSON manifest, a flat float32 windows file in
manifest order, and a one-byte-per-window label file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatVersionError, MissingInputError
from .trace import GroundTruth, LabeledWindow, Trace, WindowLabel, extract_window

WDS_FORMAT = "wds-v1"

SPLIT_NAMES = ("train", "valid", "test")
_SPLIT_FRACS = (0.8, 0.1, 0.1)


@dataclass
class WindowDataset:
    """Window matrix + labels + split index lists.

    ``windows`` is (M, n) float64 raw (unstandardized) amplitudes, ``labels``
    holds the integer class codes, and ``splits`` maps each split name to a
    sorted index array.  Splits are disjoint and cover all rows.
    """

    windows: np.ndarray
    labels: np.ndarray
    n: int
    splits: dict[str, np.ndarray]
    origins: list[tuple[str, int]] | None = None

    def __post_init__(self):
        if self.windows.ndim != 2 or self.windows.shape[1] != self.n:
            raise ValueError("windows must be (M, n)")
        if self.labels.shape != (self.windows.shape[0],):
            raise ValueError("labels must be (M,)")
        covered = np.concatenate([self.splits[s] for s in SPLIT_NAMES]) if self.splits else np.empty(0, int)
        if np.unique(covered).size != self.windows.shape[0]:
            raise ValueError("splits must be disjoint and cover every window")

    def class_counts(self, split: str | None = None) -> np.ndarray:
        """Counts per class code 0..2, overall or within one split."""
        labels = self.labels if split is None else self.labels[self.splits[split]]
        return np.bincount(labels, minlength=3)

    def subset(self, split: str) -> tuple[np.ndarray, np.ndarray]:
        idx = self.splits[split]
        return self.windows[idx], self.labels[idx]

    def __len__(self) -> int:
        return self.windows.shape[0]


def label_cipher_trace(trace: Trace, cp_start: int, cp_len: int, n: int) -> list[LabeledWindow]:
    """Window one CP instance: the first ``n`` samples become the START
    window, the rest tiles into consecutive SPARE windows, and a trailing
    partial window is dropped."""
    if n < 1:
        raise ValueError("window length n must be >= 1")
    if n > cp_len:
        raise ValueError(f"window length {n} exceeds CP length {cp_len}")
    if cp_start < 0 or cp_start + cp_len > len(trace):
        raise ValueError(
            f"CP [{cp_start}, {cp_start + cp_len}) outside trace {trace.id!r} of length {len(trace)}"
        )
    out = [LabeledWindow(extract_window(trace, cp_start, n), WindowLabel.START, (trace.id, cp_start))]
    for offset in range(cp_start + n, cp_start + cp_len - n + 1, n):
        out.append(LabeledWindow(extract_window(trace, offset, n), WindowLabel.SPARE, (trace.id, offset)))
    return out


def sample_noise_windows(noise_trace: Trace, n: int, how_many: int,
                         rng: np.random.Generator) -> list[LabeledWindow]:
    """Draw ``how_many`` NOISE windows at uniform random offsets (overlap
    allowed)."""
    if n < 1:
        raise ValueError("window length n must be >= 1")
    if len(noise_trace) < n:
        raise ValueError(
            f"noise trace {noise_trace.id!r} shorter ({len(noise_trace)}) than window {n}"
        )
    if how_many < 0:
        raise ValueError("how_many must be >= 0")
    offsets = rng.integers(0, len(noise_trace) - n + 1, size=how_many)
    return [
        LabeledWindow(extract_window(noise_trace, int(o), n), WindowLabel.NOISE, (noise_trace.id, int(o)))
        for o in offsets
    ]


def build_dataset(cipher_traces: list[tuple[Trace, GroundTruth]], noise_trace: Trace,
                  n: int, rng: np.random.Generator) -> WindowDataset:
    """Assemble the balanced, shuffled, split dataset.

    All START and SPARE windows are collected from the cipher traces, the
    larger of the two is downsampled to the smaller, and exactly that many
    NOISE windows are drawn from the noise trace.  Splits are stratified:
    every class contributes the same count to each split.
    """
    starts: list[LabeledWindow] = []
    spares: list[LabeledWindow] = []
    for trace, gt in cipher_traces:
        gt.check_within(trace)
        for cp_start, cp_len in zip(gt.cp_starts, gt.cp_lengths):
            for lw in label_cipher_trace(trace, int(cp_start), int(cp_len), n):
                (starts if lw.label == WindowLabel.START else spares).append(lw)
    if not starts:
        raise ValueError("need at least one CP instance to build a dataset")
    m = min(len(starts), len(spares))
    if m == 0:
        raise ValueError("CP instances too short to yield any SPARE window; increase cp_len or lower n")
    starts = [starts[i] for i in rng.permutation(len(starts))[:m]]
    spares = [spares[i] for i in rng.permutation(len(spares))[:m]]
    noises = sample_noise_windows(noise_trace, n, m, rng)

    per_class = [starts, spares, noises]
    windows = np.stack([lw.samples for cls in per_class for lw in cls])
    labels = np.asarray([int(lw.label) for cls in per_class for lw in cls], dtype=np.int64)
    origins = [lw.origin for cls in per_class for lw in cls]

    order = rng.permutation(windows.shape[0])
    windows, labels = windows[order], labels[order]
    origins = [origins[i] for i in order]

    n_valid = round(_SPLIT_FRACS[1] * m)
    n_test = round(_SPLIT_FRACS[2] * m)
    n_train = m - n_valid - n_test
    splits: dict[str, list[int]] = {s: [] for s in SPLIT_NAMES}
    for cls in range(3):
        cls_idx = np.nonzero(labels == cls)[0]
        splits["train"].extend(cls_idx[:n_train])
        splits["valid"].extend(cls_idx[n_train : n_train + n_valid])
        splits["test"].extend(cls_idx[n_train + n_valid :])
    split_arrays = {s: np.sort(np.asarray(idx, dtype=np.int64)) for s, idx in splits.items()}
    return WindowDataset(windows, labels, n, split_arrays, origins)


def _paths(base: str | Path) -> tuple[Path, Path, Path]:
    base = Path(base)
    if base.suffix == ".json":
        base = base.with_suffix("")
    return (
        base.with_suffix(".json"),
        base.parent / (base.name + ".windows.f32"),
        base.parent / (base.name + ".labels.u8"),
    )


def save_dataset(ds: WindowDataset, base: str | Path) -> tuple[Path, Path, Path]:
    """Write the ``wds-v1`` triple for ``base`` and return the paths."""
    json_path, win_path, lab_path = _paths(base)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    counts = ds.class_counts()
    manifest = {
        "format": WDS_FORMAT,
        "n": ds.n,
        "counts": {"start": int(counts[0]), "spare": int(counts[1]), "noise": int(counts[2])},
        "splits": {s: [int(i) for i in ds.splits[s]] for s in SPLIT_NAMES},
    }
    json_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    ds.windows.astype("<f4").tofile(win_path)
    ds.labels.astype(np.uint8).tofile(lab_path)
    return json_path, win_path, lab_path


def load_dataset(base: str | Path) -> WindowDataset:
    json_path, win_path, lab_path = _paths(base)
    for p in (json_path, win_path, lab_path):
        if not p.exists():
            raise MissingInputError(f"dataset file not found: {p}")
    manifest = json.loads(json_path.read_text())
    if manifest.get("format") != WDS_FORMAT:
        raise FormatVersionError(
            f"{json_path}: expected format {WDS_FORMAT!r}, found {manifest.get('format')!r}"
        )
    n = int(manifest["n"])
    labels = np.fromfile(lab_path, dtype=np.uint8).astype(np.int64)
    windows = np.fromfile(win_path, dtype="<f4").astype(np.float64)
    if labels.size == 0 or windows.size != labels.size * n:
        raise FormatVersionError(f"{win_path}: window payload inconsistent with manifest")
    windows = windows.reshape(labels.size, n)
    splits = {s: np.asarray(manifest["splits"][s], dtype=np.int64) for s in SPLIT_NAMES}
    return WindowDataset(windows, labels, n, splits)
