"""Core waveform and labeling types plus windowing primitives.

A :class:`Trace` is a 1-D power waveform with sample-rate metadata, a
:class:`GroundTruth` records where each crypto-primitive (CP) execution
starts and how long it runs, and :class:`LabeledWindow` is the unit the
classifier consumes.  Traces are persisted in the ``trc-v1`` layout: raw
little-endian float32 samples in ``<name>.f32`` next to a JSON sidecar
``<name>.json``.

All types are immutable after construction; the operations are pure
functions, so everything here is safe to share across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import BoundsError, FormatVersionError, MissingInputError

TRC_FORMAT = "trc-v1"

#: Variance floor below which a window is treated as constant.
_VAR_EPS = 1e-12


class WindowLabel(IntEnum):
    """Three-way window class. The integer codes are load-bearing: the
    screening stage keys on class 0 meaning "start of a CP"."""

    START = 0
    SPARE = 1
    NOISE = 2


@dataclass(frozen=True)
class Trace:
    """A single-channel power waveform.

    Attributes:
        samples: finite float64 amplitudes (dimensionless, normalized volts).
        sample_rate_hz: positive sampling rate.
        id: opaque identifier carried into downstream artifacts.
    """

    samples: np.ndarray
    sample_rate_hz: float
    id: str = ""

    def __post_init__(self):
        samples = np.array(self.samples, dtype=np.float64, copy=True)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError(f"trace {self.id!r}: samples must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(samples)):
            raise ValueError(f"trace {self.id!r}: samples contain non-finite values")
        if not (np.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise ValueError(f"trace {self.id!r}: sample_rate_hz must be positive")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class GroundTruth:
    """Per-trace CP start indices and lengths, in samples.

    Starts are strictly increasing and instances never overlap:
    ``cp_starts[i] + cp_lengths[i] <= cp_starts[i+1]``.
    """

    cp_starts: np.ndarray
    cp_lengths: np.ndarray

    def __post_init__(self):
        starts = np.array(self.cp_starts, dtype=np.int64, copy=True)
        lengths = np.array(self.cp_lengths, dtype=np.int64, copy=True)
        if starts.ndim != 1 or lengths.ndim != 1 or starts.size != lengths.size:
            raise ValueError("cp_starts and cp_lengths must be 1-D and the same size")
        if starts.size:
            if np.any(starts < 0):
                raise ValueError("cp_starts must be non-negative")
            if np.any(lengths < 1):
                raise ValueError("cp_lengths must be positive")
            ends = starts + lengths
            if np.any(starts[1:] < ends[:-1]) or np.any(np.diff(starts) <= 0):
                raise ValueError("CP instances must be ascending and non-overlapping")
        starts.flags.writeable = False
        lengths.flags.writeable = False
        object.__setattr__(self, "cp_starts", starts)
        object.__setattr__(self, "cp_lengths", lengths)

    def __len__(self) -> int:
        return self.cp_starts.size

    @property
    def cp_ends(self) -> np.ndarray:
        return self.cp_starts + self.cp_lengths

    def check_within(self, trace: Trace) -> None:
        """Raise if any CP instance extends past the end of ``trace``."""
        if len(self) and int(self.cp_ends[-1]) > len(trace):
            raise ValueError(
                f"ground truth exceeds trace {trace.id!r}: "
                f"last CP ends at {int(self.cp_ends[-1])}, trace length {len(trace)}"
            )


@dataclass(frozen=True)
class LabeledWindow:
    """An ``n``-sample slice tagged with its class and provenance."""

    samples: np.ndarray
    label: WindowLabel
    origin: tuple[str, int]

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0 or not np.all(np.isfinite(samples)):
            raise ValueError("window samples must be a non-empty finite 1-D sequence")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "label", WindowLabel(self.label))


def extract_window(trace: Trace, offset: int, n: int) -> np.ndarray:
    """Return ``trace.samples[offset:offset + n]``.

    Raises :class:`BoundsError` when the requested range is not fully inside
    the trace.
    """
    if n < 1:
        raise ValueError("window length n must be >= 1")
    if offset < 0 or offset + n > len(trace):
        raise BoundsError(
            f"trace {trace.id!r}: window [{offset}, {offset + n}) outside "
            f"valid range [0, {len(trace)})"
        )
    return trace.samples[offset : offset + n]


def standardize_window(window: np.ndarray) -> np.ndarray:
    """Z-score a window to zero mean and unit (population) standard deviation.

    Near-constant windows (sigma below 1e-12) map to all zeros rather than
    amplifying numerical noise.
    """
    w = np.asarray(window, dtype=np.float64)
    if w.ndim != 1 or w.size < 2:
        raise ValueError("standardize_window requires a 1-D window of at least 2 samples")
    sigma = w.std()
    if sigma < _VAR_EPS:
        return np.zeros_like(w)
    return (w - w.mean()) / sigma


def standardize_rows(windows: np.ndarray) -> np.ndarray:
    """Row-wise version of :func:`standardize_window` for a (M, n) array."""
    x = np.asarray(windows, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("standardize_rows requires a (M, n) array with n >= 2")
    mu = x.mean(axis=1, keepdims=True)
    sigma = x.std(axis=1, keepdims=True)
    safe = sigma >= _VAR_EPS
    out = np.where(safe, (x - mu) / np.where(safe, sigma, 1.0), 0.0)
    return out


def _strip_trc_suffix(path: str | Path) -> Path:
    p = Path(path)
    if p.suffix in (".f32", ".json"):
        p = p.with_suffix("")
    return p


def save_trace(trace: Trace, base: str | Path, ground_truth: GroundTruth | None = None) -> tuple[Path, Path]:
    """Write ``<base>.f32`` (raw LE float32) and the ``<base>.json`` sidecar.

    Returns the two paths written.
    """
    base = _strip_trc_suffix(base)
    f32_path = base.with_suffix(".f32")
    json_path = base.with_suffix(".json")
    f32_path.parent.mkdir(parents=True, exist_ok=True)
    trace.samples.astype("<f4").tofile(f32_path)
    sidecar: dict = {
        "format": TRC_FORMAT,
        "sample_rate_hz": float(trace.sample_rate_hz),
        "id": trace.id,
    }
    if ground_truth is not None:
        sidecar["ground_truth"] = {
            "cp_starts": [int(v) for v in ground_truth.cp_starts],
            "cp_lengths": [int(v) for v in ground_truth.cp_lengths],
        }
    json_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return f32_path, json_path


def load_trace(base: str | Path) -> tuple[Trace, GroundTruth | None]:
    """Read a ``trc-v1`` pair back into a :class:`Trace` and optional truth."""
    base = _strip_trc_suffix(base)
    f32_path = base.with_suffix(".f32")
    json_path = base.with_suffix(".json")
    if not f32_path.exists() or not json_path.exists():
        raise MissingInputError(f"trace files not found for base {base}")
    sidecar = json.loads(json_path.read_text())
    if sidecar.get("format") != TRC_FORMAT:
        raise FormatVersionError(
            f"{json_path}: expected format {TRC_FORMAT!r}, found {sidecar.get('format')!r}"
        )
    samples = np.fromfile(f32_path, dtype="<f4").astype(np.float64)
    trace = Trace(samples, sample_rate_hz=sidecar["sample_rate_hz"], id=sidecar.get("id", ""))
    gt = None
    if "ground_truth" in sidecar:
        gt = GroundTruth(
            np.asarray(sidecar["ground_truth"]["cp_starts"], dtype=np.int64),
            np.asarray(sidecar["ground_truth"]["cp_lengths"], dtype=np.int64),
        )
        gt.check_within(trace)
    return trace, gt
