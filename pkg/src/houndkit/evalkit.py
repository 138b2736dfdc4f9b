"""Quality metrics and the matched-filter baseline.

The IoU treats both the predicted and the true CP as intervals of the true
length (the predicted end is assumed accurate), so the score reduces to
``(len - d) / (len + d)`` for a start offset ``d`` up to one CP length.
Hits come in two flavors: ``detection_ratio`` (predictions per true CP,
may exceed 1 under false positives) and ``matched_rate`` (fraction of true
CPs with a one-to-one matched prediction inside the tolerance).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.signal import fftconvolve

from .locator import CpLocations
from .nn.model import ConvNet1d, predict_batch
from .trace import GroundTruth, Trace


@dataclass(frozen=True)
class IoUReport:
    per_cp_iou: tuple[float, ...]
    mean: float
    std: float

    @classmethod
    def from_values(cls, values) -> "IoUReport":
        values = tuple(float(v) for v in values)
        arr = np.asarray(values, dtype=np.float64)
        return cls(values, float(arr.mean()) if arr.size else 0.0,
                   float(arr.std()) if arr.size else 0.0)


@dataclass(frozen=True)
class HitsReport:
    detection_ratio: float
    matched_rate: float
    tolerance: float


def iou(pred_start: int, gt_start: int, gt_len: int) -> float:
    """Interval overlap score in [0, 1] for two same-length intervals."""
    if gt_len < 1:
        raise ValueError("gt_len must be >= 1")
    d = abs(int(pred_start) - int(gt_start))
    if d >= gt_len:
        return 0.0
    return (gt_len - d) / (gt_len + d)


def match_locations(pred: CpLocations, gt: GroundTruth,
                    tolerance: float) -> list[int | None]:
    """Greedy one-to-one matching of predictions to true starts.

    Candidate pairs within ``tolerance`` are taken in ascending distance
    order (ties resolve by ground-truth then prediction index).  Returns,
    per true CP, the index of its matched prediction or None.
    """
    pairs = []
    for gi, g in enumerate(gt.cp_starts):
        for pi, p in enumerate(pred.starts):
            d = abs(int(p) - int(g))
            if d <= tolerance:
                pairs.append((d, gi, pi))
    pairs.sort()
    matched_gt: list[int | None] = [None] * len(gt)
    used_pred: set[int] = set()
    for d, gi, pi in pairs:
        if matched_gt[gi] is None and pi not in used_pred:
            matched_gt[gi] = pi
            used_pred.add(pi)
    return matched_gt


def score_locations(pred: CpLocations, gt: GroundTruth,
                    tolerance: float | None = None) -> tuple[HitsReport, IoUReport]:
    """Hits and per-CP IoU for a prediction set against ground truth.

    ``tolerance`` defaults to half the mean true CP length.  Unmatched true
    CPs contribute an IoU of 0.
    """
    if len(gt) == 0:
        raise ValueError("ground truth must contain at least one CP")
    if tolerance is None:
        tolerance = float(gt.cp_lengths.mean()) / 2.0
    matched = match_locations(pred, gt, tolerance)
    ious = []
    for gi, pi in enumerate(matched):
        if pi is None:
            ious.append(0.0)
        else:
            ious.append(iou(int(pred.starts[pi]), int(gt.cp_starts[gi]), int(gt.cp_lengths[gi])))
    hits = HitsReport(
        detection_ratio=len(pred) / len(gt),
        matched_rate=sum(pi is not None for pi in matched) / len(gt),
        tolerance=float(tolerance),
    )
    return hits, IoUReport.from_values(ious)


def confusion_matrix(model: ConvNet1d, windows: np.ndarray,
                     labels: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 counts indexed (predicted, true) plus row-normalized percentages.

    Column sums equal the per-class window counts.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise ValueError("cannot build a confusion matrix from an empty split")
    pred, _ = predict_batch(model, windows)
    counts = np.zeros((3, 3), dtype=np.int64)
    np.add.at(counts, (pred, labels), 1)
    row_sums = counts.sum(axis=1, keepdims=True)
    percent = np.divide(100.0 * counts, row_sums, out=np.zeros((3, 3)), where=row_sums > 0)
    return counts, percent


def matched_filter_locate(trace: Trace, template, threshold_quantile: float = 0.9995,
                          max_peaks: int | None = None) -> CpLocations:
    """Classical template-correlation detector.

    Computes the normalized cross-correlation (zero-mean, unit-norm at every
    alignment) of the template against the trace, keeps alignments scoring
    at or above the requested quantile of the correlation signal, and
    non-maximum-suppresses them greedily within one template length.
    """
    t = np.asarray(getattr(template, "waveform", template), dtype=np.float64)
    x = trace.samples
    m = t.size
    if m < 2:
        raise ValueError("template must have at least 2 samples")
    if m > x.size:
        raise ValueError(f"template ({m}) longer than trace ({x.size})")
    if not 0.0 < threshold_quantile < 1.0:
        raise ValueError("threshold_quantile must be in (0, 1)")
    t0 = t - t.mean()
    t_norm = np.sqrt((t0 * t0).sum())
    if t_norm < 1e-12:
        return CpLocations(np.empty(0, dtype=np.int64))
    dot = fftconvolve(x, t0[::-1], mode="valid")
    cs1 = np.concatenate(([0.0], np.cumsum(x)))
    cs2 = np.concatenate(([0.0], np.cumsum(x * x)))
    s1 = cs1[m:] - cs1[:-m]
    s2 = cs2[m:] - cs2[:-m]
    win_var = np.maximum(s2 - s1 * s1 / m, 0.0)
    denom = np.sqrt(win_var) * t_norm
    ncc = np.divide(dot, denom, out=np.zeros_like(dot), where=denom > 1e-12)
    threshold = np.quantile(ncc, threshold_quantile)
    cand = np.nonzero(ncc >= threshold)[0]
    order = cand[np.lexsort((cand, -ncc[cand]))]
    accepted: list[int] = []
    for i in order:
        i = int(i)
        if all(abs(i - a) >= m for a in accepted):
            accepted.append(i)
            if max_peaks is not None and len(accepted) >= max_peaks:
                break
    return CpLocations(np.asarray(sorted(accepted), dtype=np.int64))


def save_report_json(hits: HitsReport, iou_report: IoUReport, path: str | Path,
                     extra: dict | None = None) -> Path:
    path = Path(path)
    payload = {
        "hits": {
            "detection_ratio": hits.detection_ratio,
            "matched_rate": hits.matched_rate,
            "tolerance": hits.tolerance,
        },
        "iou": {
            "per_cp": list(iou_report.per_cp_iou),
            "mean": iou_report.mean,
            "std": iou_report.std,
        },
    }
    if extra:
        payload.update(extra)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def save_report_csv(gt: GroundTruth, pred: CpLocations, matched: list[int | None],
                    iou_report: IoUReport, path: str | Path) -> Path:
    """One row per true CP with its matched prediction (if any) and IoU."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cp_index", "gt_start", "gt_length", "pred_start", "distance", "iou"])
        for gi in range(len(gt)):
            pi = matched[gi]
            if pi is None:
                pred_start, dist = "", ""
            else:
                pred_start = int(pred.starts[pi])
                dist = abs(pred_start - int(gt.cp_starts[gi]))
            writer.writerow([
                gi, int(gt.cp_starts[gi]), int(gt.cp_lengths[gi]),
                pred_start, dist, repr(iou_report.per_cp_iou[gi]),
            ])
    return path
