"""Minimal deterministic SVG rendering of traces with CP bands.

Hand-rolled rather than using a plotting library so repeated runs emit
byte-identical files (no embedded timestamps).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .locator import CpLocations
from .trace import GroundTruth, Trace

_W, _H = 1200, 320
_MARGIN = 10
_MAX_COLUMNS = 1200


def _envelope(samples: np.ndarray, columns: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-column min/max so the drawing keeps peak structure."""
    bucket = max(1, int(np.ceil(samples.size / columns)))
    pad = (-samples.size) % bucket
    padded = np.pad(samples, (0, pad), mode="edge")
    grid = padded.reshape(-1, bucket)
    return grid.min(axis=1), grid.max(axis=1)


def render_locate_svg(trace: Trace, gt: GroundTruth | None, pred: CpLocations | None,
                      path: str | Path) -> Path:
    """Trace envelope with shaded true-CP bands and predicted start lines."""
    path = Path(path)
    samples = trace.samples
    lo, hi = _envelope(samples, _MAX_COLUMNS)
    columns = lo.size
    vmin, vmax = float(samples.min()), float(samples.max())
    span = (vmax - vmin) or 1.0

    def sx(sample_idx: float) -> float:
        return _MARGIN + (_W - 2 * _MARGIN) * sample_idx / max(1, samples.size - 1)

    def sy(value: float) -> float:
        return _H - _MARGIN - (_H - 2 * _MARGIN) * (value - vmin) / span

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
    ]
    if gt is not None:
        for start, length in zip(gt.cp_starts, gt.cp_lengths):
            x0, x1 = sx(int(start)), sx(int(start) + int(length))
            parts.append(
                f'<rect x="{x0:.2f}" y="{_MARGIN}" width="{x1 - x0:.2f}" '
                f'height="{_H - 2 * _MARGIN}" fill="#7bc87b" fill-opacity="0.3"/>'
            )
    step = samples.size / columns
    points_top = " ".join(
        f"{sx(i * step):.2f},{sy(v):.2f}" for i, v in enumerate(hi)
    )
    points_bottom = " ".join(
        f"{sx((columns - 1 - i) * step):.2f},{sy(v):.2f}" for i, v in enumerate(lo[::-1])
    )
    parts.append(
        f'<polygon points="{points_top} {points_bottom}" fill="#3b6ea5" '
        f'fill-opacity="0.85" stroke="none"/>'
    )
    if pred is not None:
        for start in pred.starts:
            x = sx(int(start))
            parts.append(
                f'<line x1="{x:.2f}" y1="{_MARGIN}" x2="{x:.2f}" y2="{_H - _MARGIN}" '
                f'stroke="#c03030" stroke-width="1.5"/>'
            )
    parts.append("</svg>")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts) + "\n")
    return path
