"""Full-reference quality metrics (PSNR, SSIM) and paired evaluation."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from hazeforge.imgcore import as_image, load_image

log = logging.getLogger(__name__)

LUMA = np.array([0.299, 0.587, 0.114])
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01**2
SSIM_C2 = 0.03**2


def _pair(a, b):
    a = np.asarray(as_image(a), dtype=np.float64)
    b = np.asarray(as_image(b), dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b) -> float:
    """PSNR in dB for unit peak; ``inf`` for identical images."""
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def gaussian_1d(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(x: np.ndarray, g1: np.ndarray) -> np.ndarray:
    k = g1.size
    rows = sliding_window_view(x, k, axis=0) @ g1
    return sliding_window_view(rows, k, axis=1) @ g1


def ssim(a, b) -> float:
    """Mean single-scale SSIM of the luma planes over valid window positions."""
    a, b = _pair(a, b)
    if min(a.shape[:2]) < SSIM_WINDOW:
        raise ValueError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for SSIM, got {a.shape[:2]}"
        )
    x = a @ LUMA
    y = b @ LUMA
    g1 = gaussian_1d()

    mu_x = _filter_valid(x, g1)
    mu_y = _filter_valid(y, g1)
    sxx = _filter_valid(x * x, g1) - mu_x * mu_x
    syy = _filter_valid(y * y, g1) - mu_y * mu_y
    sxy = _filter_valid(x * y, g1) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * sxy + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (sxx + syy + SSIM_C2)
    return float(np.mean(num / den))


# -- paired evaluation ------------------------------------------------------


@dataclass
class MetricReport:
    pair_id: int
    psnr: float | None = None
    ssim: float | None = None
    error: str | None = None


def _json_float(v):
    return None if v is None or not math.isfinite(v) else v


@dataclass
class EvalReport:
    rows: list[MetricReport] = field(default_factory=list)

    @property
    def ok(self) -> list[MetricReport]:
        return [r for r in self.rows if r.error is None]

    @property
    def failures(self) -> int:
        return len(self.rows) - len(self.ok)

    @property
    def mean_psnr(self) -> float | None:
        ok = self.ok
        return float(np.mean([r.psnr for r in ok])) if ok else None

    @property
    def mean_ssim(self) -> float | None:
        ok = self.ok
        return float(np.mean([r.ssim for r in ok])) if ok else None

    def summary(self) -> dict:
        return {
            "pairs": len(self.ok),
            "failures": self.failures,
            "mean_psnr": _json_float(self.mean_psnr),
            "mean_ssim": _json_float(self.mean_ssim),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["pair_id", "psnr_db", "ssim"])
            for r in self.ok:
                p = "inf" if math.isinf(r.psnr) else repr(r.psnr)
                w.writerow([r.pair_id, p, repr(r.ssim)])

    def write_summary(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2) + "\n")


def identity_restorer(img):
    return img


def evaluate_pairs(
    manifest, restorer: Callable = identity_restorer, jobs: int = 1
) -> EvalReport:
    """Restore each hazy image and score it against its clean reference."""

    def work(item):
        i, row = item
        if row.hazy_path is None:
            return MetricReport(i, error=f"row {i} has no hazy image")
        try:
            clean = load_image(row.clean_path)
            restored = restorer(load_image(row.hazy_path))
            return MetricReport(i, psnr(restored, clean), ssim(restored, clean))
        except (OSError, ValueError) as exc:
            return MetricReport(i, error=str(exc))

    items = list(enumerate(manifest))
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            rows = list(pool.map(work, items))
    else:
        rows = [work(it) for it in items]
    for r in rows:
        if r.error:
            log.warning("pair %d failed: %s", r.pair_id, r.error)
    return EvalReport(rows)
