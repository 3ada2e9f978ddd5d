"""Reconstruction quality: relative error, PSNR and SSIM."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .grid import norm

__all__ = ["MetricReport", "relative_error", "psnr", "ssim", "report"]


def _pair(truth, rec):
    truth = np.asarray(truth, dtype=np.float64)
    rec = np.asarray(rec, dtype=np.float64)
    if truth.shape != rec.shape:
        raise ValueError(f"shape mismatch: {truth.shape} vs {rec.shape}")
    return truth, rec


def relative_error(truth, rec):
    truth, rec = _pair(truth, rec)
    scale = norm(truth)
    if scale == 0.0:
        raise ValueError("relative error undefined for an all-zero reference")
    return norm(rec - truth) / scale


def psnr(truth, rec, data_range=1.0):
    """Peak signal-to-noise ratio in dB using the root-mean-square error.

    Returns ``inf`` for identical images.
    """
    truth, rec = _pair(truth, rec)
    rms = math.sqrt(float(np.mean((truth - rec) ** 2)))
    if rms == 0.0:
        return math.inf
    return 20.0 * math.log10(data_range / rms)


def ssim(truth, rec, window=7, data_range=1.0):
    """Mean structural similarity over all fully contained ``window`` patches.

    Uniform window, population statistics, ``C1 = (0.01 L)^2`` and
    ``C2 = (0.03 L)^2``.
    """
    a, b = _pair(truth, rec)
    if a.ndim != 2 or min(a.shape) < window:
        raise ValueError(f"images must be 2-D and at least {window}x{window}")
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2
    wa = sliding_window_view(a, (window, window))
    wb = sliding_window_view(b, (window, window))
    mu_a = wa.mean(axis=(-2, -1))
    mu_b = wb.mean(axis=(-2, -1))
    var_a = (wa * wa).mean(axis=(-2, -1)) - mu_a ** 2
    var_b = (wb * wb).mean(axis=(-2, -1)) - mu_b ** 2
    cov = (wa * wb).mean(axis=(-2, -1)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


@dataclass(frozen=True)
class MetricReport:
    re: float
    psnr_db: float
    ssim: float

    def as_row(self):
        return {"re": self.re, "psnr": self.psnr_db, "ssim": self.ssim}


def report(truth, rec):
    return MetricReport(relative_error(truth, rec), psnr(truth, rec), ssim(truth, rec))
