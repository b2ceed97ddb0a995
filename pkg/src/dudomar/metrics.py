"""PSNR / SSIM on HU images and size-grouped reporting.

HU images are shifted by +1024 and clipped to ``[0, peak]`` before
comparison, with ``peak = 4096`` by default.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .grids import Image, ShapeError

PEAK = 4096.0
HU_OFFSET = 1024.0
PSNR_CAP = 99.0


def to_display_range(values: np.ndarray, peak: float = PEAK) -> np.ndarray:
    return np.clip(np.asarray(values, dtype=np.float64) + HU_OFFSET, 0.0, peak)


def _pair(a, b):
    if isinstance(a, Image) and isinstance(b, Image):
        if a.grid != b.grid:
            raise ShapeError("images are on different grids")
        return a.values, b.values
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak: float = PEAK, exclude_mask=None) -> float:
    """PSNR in dB between two HU images, optionally ignoring masked pixels.

    Identical inputs give ``PSNR_CAP`` instead of infinity.
    """
    if not peak > 0:
        raise ValueError("peak must be positive")
    a, b = _pair(a, b)
    keep = np.ones(a.shape, bool)
    if exclude_mask is not None:
        m = exclude_mask.values if isinstance(exclude_mask, Image) else np.asarray(exclude_mask)
        if m.shape != a.shape:
            raise ShapeError("exclude mask shape mismatch")
        keep = m == 0
    if not keep.any():
        raise ValueError("no pixels left after excluding the mask")
    diff = to_display_range(a, peak)[keep] - to_display_range(b, peak)[keep]
    mse = float(np.mean(diff ** 2))
    if mse == 0:
        return PSNR_CAP
    return min(PSNR_CAP, 10.0 * np.log10(peak ** 2 / mse))


def ssim(a, b, window: int = 11, k1: float = 0.01, k2: float = 0.03, peak: float = PEAK,
         sigma: float = 1.5) -> float:
    """Mean SSIM with a Gaussian window truncated to ``window`` pixels."""
    if window < 3 or window % 2 == 0:
        raise ValueError("window must be odd and >= 3")
    a, b = _pair(a, b)
    x, y = to_display_range(a, peak), to_display_range(b, peak)
    truncate = ((window - 1) / 2) / sigma

    def blur(z):
        return ndimage.gaussian_filter(z, sigma, truncate=truncate, mode="reflect")

    mx, my = blur(x), blur(y)
    vxx = blur(x * x) - mx * mx
    vyy = blur(y * y) - my * my
    vxy = blur(x * y) - mx * my
    c1, c2 = (k1 * peak) ** 2, (k2 * peak) ** 2
    num = (2 * mx * my + c1) * (2 * vxy + c2)
    den = (mx * mx + my * my + c1) * (vxx + vyy + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class GroupRow:
    label: str
    sizes: tuple[int, ...]
    psnr: float
    ssim: float
    count: int


def group_report(results, groups=2) -> list[GroupRow]:
    """Average PSNR/SSIM per metal-size group, ordered large to small, plus an overall row.

    ``results`` holds ``(metal_size_px, psnr, ssim)`` tuples. ``groups`` is
    either the number of adjacent distinct sizes per group or an explicit
    list of size lists.
    """
    results = list(results)
    if not results:
        raise ValueError("no results to report")
    sizes = sorted({int(r[0]) for r in results}, reverse=True)
    if isinstance(groups, int):
        if groups < 1:
            raise ValueError("group size must be >= 1")
        partition = [sizes[i:i + groups] for i in range(0, len(sizes), groups)]
    else:
        partition = [sorted((int(s) for s in g), reverse=True) for g in groups]
        partition.sort(key=lambda g: -max(g) if g else 0)
    rows = []
    for g in partition:
        members = [r for r in results if int(r[0]) in g]
        if not members:
            raise ValueError(f"group {g} has no results")
        rows.append(GroupRow("-".join(map(str, g)), tuple(g), float(np.mean([r[1] for r in members])),
                             float(np.mean([r[2] for r in members])), len(members)))
    rows.append(GroupRow("average", tuple(sizes), float(np.mean([r[1] for r in results])),
                         float(np.mean([r[2] for r in results])), len(results)))
    return rows


REPORT_COLUMNS = ("case_id", "metal_size_px", "method", "psnr_db", "ssim")


def write_report(path, rows, groups=None) -> Path:
    """CSV with one line per (case, method) and, when ``groups`` is set, grouped summary lines.

    Summary lines use ``case_id = group:<label>`` and leave the size empty.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = sorted(rows, key=lambda r: (r[0], r[2]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for case_id, size, method, p, s in rows:
            w.writerow((case_id, size, method, f"{p:.6f}", f"{s:.6f}"))
        if groups is not None:
            for method in sorted({r[2] for r in rows}):
                sub = [(r[1], r[3], r[4]) for r in rows if r[2] == method]
                for g in group_report(sub, groups):
                    w.writerow((f"group:{g.label}", "", method, f"{g.psnr:.6f}", f"{g.ssim:.6f}"))
    return path

