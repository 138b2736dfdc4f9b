"""Inference pipeline: sliding-window classification, iterative screening,
and alignment.

The classifier turns a trace into a *segmentation track* (one class code per
window offset).  Screening then polishes the track with a majority filter,
extracts falling edges into class 0 as CP starts, and iteratively re-scans
the stretches between found starts with ever smaller filter kernels until
the kernel shrinks below 1 or nothing is left to re-scan.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import FormatVersionError, MissingInputError
from .nn.model import ConvNet1d, predict_batch
from .trace import Trace

LOC_FORMAT = "loc-v1"


@dataclass(frozen=True)
class SegmentationTrack:
    """Per-window argmax classes at a fixed stride."""

    classes: np.ndarray
    stride: int
    window_n: int
    trace_id: str = ""

    def __post_init__(self):
        classes = np.array(self.classes, dtype=np.int64, copy=True)
        if classes.ndim != 1 or classes.size == 0:
            raise ValueError("track must be a non-empty 1-D class sequence")
        if classes.min() < 0 or classes.max() > 2:
            raise ValueError("track classes must lie in {0, 1, 2}")
        if self.stride < 1 or self.window_n < 1:
            raise ValueError("stride and window_n must be >= 1")
        classes.flags.writeable = False
        object.__setattr__(self, "classes", classes)

    def __len__(self) -> int:
        return self.classes.size


@dataclass(frozen=True)
class ScreenConfig:
    """Screening inputs: initial majority kernel (odd), the expected average
    CP length in samples, and the classification stride."""

    k0: int
    avg_cp: int
    s: int

    def __post_init__(self):
        if self.k0 < 1 or self.k0 % 2 == 0:
            raise ValueError("k0 must be odd and >= 1")
        if self.avg_cp < 1 or self.s < 1:
            raise ValueError("avg_cp and s must be >= 1")


@dataclass(frozen=True)
class CpLocations:
    """Ascending, unique CP start sample indices."""

    starts: np.ndarray

    def __post_init__(self):
        starts = np.array(self.starts, dtype=np.int64, copy=True)
        if starts.ndim != 1:
            raise ValueError("starts must be 1-D")
        if starts.size and (np.any(np.diff(starts) <= 0) or starts.min() < 0):
            raise ValueError("starts must be non-negative, ascending, unique")
        starts.flags.writeable = False
        object.__setattr__(self, "starts", starts)

    def __len__(self) -> int:
        return self.starts.size


def sliding_windows(trace_len: int, n: int, s: int) -> np.ndarray:
    """Offsets 0, s, 2s, ... while the window still fits the trace."""
    if s < 1 or n < 1:
        raise ValueError("n and s must be >= 1")
    if n > trace_len:
        raise ValueError(f"window {n} longer than trace ({trace_len})")
    return np.arange(0, trace_len - n + 1, s, dtype=np.int64)


def classify_track(model: ConvNet1d, trace: Trace, n: int, s: int,
                   batch_size: int = 128) -> SegmentationTrack:
    """Classify every sliding window; standardization matches training."""
    offsets = sliding_windows(len(trace), n, s)
    views = sliding_window_view(trace.samples, n)[::s]
    classes = np.empty(offsets.size, dtype=np.int64)
    for lo in range(0, offsets.size, batch_size):
        chunk = np.array(views[lo : lo + batch_size])
        classes[lo : lo + batch_size], _ = predict_batch(model, chunk, batch_size=batch_size)
    return SegmentationTrack(classes, stride=s, window_n=n, trace_id=trace.id)


def majority_filter(classes: np.ndarray, k: int) -> np.ndarray:
    """Replace each element with the most frequent value in the centered
    k-window; the window shrinks at the edges and ties go to the smallest
    class value."""
    if k < 1 or k % 2 == 0:
        raise ValueError("majority kernel k must be odd and >= 1")
    seg = np.asarray(classes, dtype=np.int64)
    if seg.ndim != 1:
        raise ValueError("segmentation must be 1-D")
    if k == 1 or seg.size <= 1:
        return seg.copy()
    half = k // 2
    length = seg.size
    # prefix sums of one-hot counts give each clipped window's class tally
    prefix = np.zeros((3, length + 1), dtype=np.int64)
    for c in range(3):
        np.cumsum(seg == c, out=prefix[c, 1:])
    pos = np.arange(length)
    lo = np.maximum(pos - half, 0)
    hi = np.minimum(pos + half + 1, length)
    counts = prefix[:, hi] - prefix[:, lo]
    return counts.argmax(axis=0).astype(np.int64)


def extract_starts(classes: np.ndarray, s: int) -> np.ndarray:
    """Sample indices of falling edges into class 0 (predecessor not 0),
    scaled by the stride.  A class-0 run at index 0 has no edge and is not
    reported."""
    seg = np.asarray(classes, dtype=np.int64)
    if seg.size < 2:
        return np.empty(0, dtype=np.int64)
    edges = np.nonzero((seg[1:] == 0) & (seg[:-1] != 0))[0] + 1
    return edges * s


def refine(k: int, avg_cp: int, starts: np.ndarray, classes: np.ndarray,
           s: int) -> tuple[int, list[tuple[int, np.ndarray]]]:
    """Halve the kernel (re-oddified) and queue the stretches between
    consecutive starts that are wide enough to hide another CP.

    ``starts`` are in sample units; returned sub-segments carry their base
    window index so extraction can report absolute positions.
    """
    k_new = k // 2
    if k_new > 1 and k_new % 2 == 0:
        k_new -= 1
    starts = np.asarray(starts, dtype=np.int64)
    if starts.size >= 2:
        min_cp = min(int(avg_cp), int(np.diff(starts).min()))
    else:
        min_cp = int(avg_cp)
    subs: list[tuple[int, np.ndarray]] = []
    for left, right in zip(starts[:-1], starts[1:]):
        if right - left > 2 * min_cp:
            lo = int(left) // s
            hi = int(right) // s
            if hi - lo >= 2:
                subs.append((lo, classes[lo:hi]))
    return k_new, subs


def _merge_starts(existing: np.ndarray, new: np.ndarray, radius: float) -> np.ndarray:
    """Sorted union where any start closer than ``radius`` to the previous
    kept one collapses onto the earlier."""
    merged: list[int] = []
    for v in np.sort(np.concatenate([existing, new])):
        if not merged or v - merged[-1] >= radius:
            merged.append(int(v))
    return np.asarray(merged, dtype=np.int64)


def screen(track: SegmentationTrack, cfg: ScreenConfig) -> CpLocations:
    """Iterative polish / extract / refine over the segmentation track.

    Starts found across iterations accumulate into one set, deduplicated
    with a proximity merge of half the current minimum CP length.  The loop
    ends when the kernel drops below 1 or no stretch is queued for re-scan.
    """
    if cfg.s != track.stride:
        raise ValueError(f"config stride {cfg.s} != track stride {track.stride}")
    classes = track.classes
    s = track.stride
    k = cfg.k0
    queue: list[tuple[int, np.ndarray]] = [(0, classes)]
    starts = np.empty(0, dtype=np.int64)
    while queue and k >= 1:
        new_starts: list[int] = []
        for base, sub in queue:
            polished = majority_filter(sub, k)
            new_starts.extend(extract_starts(polished, s) + base * s)
        new_arr = np.unique(np.asarray(new_starts, dtype=np.int64))
        k, queue = refine(k, cfg.avg_cp, new_arr, classes, s)
        if new_arr.size >= 2:
            min_cp = min(cfg.avg_cp, int(np.diff(new_arr).min()))
        else:
            min_cp = cfg.avg_cp
        starts = _merge_starts(starts, new_arr, min_cp / 2.0)
    return CpLocations(starts)


def align(trace: Trace, locations: CpLocations, chunk_len: int) -> np.ndarray:
    """Slice ``chunk_len`` samples at each start, zero-padded past the end."""
    if chunk_len < 1:
        raise ValueError("chunk_len must be >= 1")
    if len(locations) and int(locations.starts.max()) >= len(trace):
        raise ValueError("location outside trace")
    chunks = np.zeros((len(locations), chunk_len))
    for i, start in enumerate(locations.starts):
        avail = min(chunk_len, len(trace) - int(start))
        chunks[i, :avail] = trace.samples[int(start) : int(start) + avail]
    return chunks


def save_locations(locs: CpLocations, base: str | Path, trace_id: str,
                   n: int, s: int) -> Path:
    base = Path(base)
    if base.suffix == ".json":
        base = base.with_suffix("")
    path = base.with_suffix(".json")
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": LOC_FORMAT,
        "trace_id": trace_id,
        "n": int(n),
        "s": int(s),
        "starts": [int(v) for v in locs.starts],
    }
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def load_locations(base: str | Path) -> tuple[CpLocations, dict]:
    base = Path(base)
    if base.suffix == ".json":
        base = base.with_suffix("")
    path = base.with_suffix(".json")
    if not path.exists():
        raise MissingInputError(f"locations file not found: {path}")
    payload = json.loads(path.read_text())
    if payload.get("format") != LOC_FORMAT:
        raise FormatVersionError(
            f"{path}: expected format {LOC_FORMAT!r}, found {payload.get('format')!r}"
        )
    return CpLocations(np.asarray(payload["starts"], dtype=np.int64)), payload


def save_track_csv(track: SegmentationTrack, path: str | Path) -> Path:
    """CSV export (window_index, class) for plotting."""
    path = Path(path)
    lines = ["window_index,class"]
    lines.extend(f"{i},{int(c)}" for i, c in enumerate(track.classes))
    path.write_text("\n".join(lines) + "\n")
    return path
