"""Synthetic ground-truth images."""
from __future__ import annotations

import numpy as np
import scipy.ndimage

from .grid import RandomSource
from .io import load_image, save_image

__all__ = ["shepp_logan", "binary_blobs", "flat", "impulse", "make_phantom",
           "load_image", "save_image"]

# Modified Shepp-Logan (Toft): intensity, semi-axes a, b, centre x0, y0, angle (deg)
_SHEPP_LOGAN = [
    (1.00, 0.6900, 0.9200, 0.00, 0.0000, 0.0),
    (-0.80, 0.6624, 0.8740, 0.00, -0.0184, 0.0),
    (-0.20, 0.1100, 0.3100, 0.22, 0.0000, -18.0),
    (-0.20, 0.1600, 0.4100, -0.22, 0.0000, 18.0),
    (0.10, 0.2100, 0.2500, 0.00, 0.3500, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, 0.1000, 0.0),
    (0.10, 0.0460, 0.0460, 0.00, -0.1000, 0.0),
    (0.10, 0.0460, 0.0230, -0.08, -0.6050, 0.0),
    (0.10, 0.0230, 0.0230, 0.00, -0.6060, 0.0),
    (0.10, 0.0230, 0.0460, 0.06, -0.6050, 0.0),
]


def shepp_logan(side=256, supersample=2):
    """Ten-ellipse head phantom.

    Each pixel averages ``supersample x supersample`` point samples of the
    ellipse indicator, so edges are area-weighted; ``supersample=1`` is plain
    pixel-centre membership.
    """
    if side < 16:
        raise ValueError("side must be >= 16")
    if supersample < 1:
        raise ValueError("supersample must be >= 1")
    fine = side * supersample
    coords = (np.arange(fine) + 0.5) / fine * 2.0 - 1.0
    x = coords[None, :]
    y = -coords[:, None]  # row 0 is the top of the head
    img = np.zeros((fine, fine))
    for value, a, b, x0, y0, phi in _SHEPP_LOGAN:
        t = np.deg2rad(phi)
        xr = (x - x0) * np.cos(t) + (y - y0) * np.sin(t)
        yr = -(x - x0) * np.sin(t) + (y - y0) * np.cos(t)
        img += value * ((xr / a) ** 2 + (yr / b) ** 2 <= 1.0)
    img = np.clip(img, 0.0, 1.0)
    if supersample > 1:
        img = img.reshape(side, supersample, side, supersample).mean(axis=(1, 3))
    return img


def binary_blobs(side=128, seed=0, blob_fraction=0.5):
    """Seeded white noise, Gaussian-smoothed with sigma = side/16, thresholded
    so that ``blob_fraction`` of the pixels are foreground."""
    if side < 16:
        raise ValueError("side must be >= 16")
    if not 0.0 < blob_fraction < 1.0:
        raise ValueError("blob_fraction must lie in (0, 1)")
    noise = RandomSource(seed).standard_normal((side, side))
    field = scipy.ndimage.gaussian_filter(noise, sigma=side / 16.0, mode="reflect")
    level = np.quantile(field, 1.0 - blob_fraction)
    return (field > level).astype(np.float64)


def flat(side, value=0.5):
    return np.full((side, side), float(value))


def impulse(side, value=1.0):
    img = np.zeros((side, side))
    img[side // 2, side // 2] = value
    return img


def make_phantom(kind, side, seed=0, blob_fraction=0.5):
    if kind == "shepp-logan":
        return shepp_logan(side)
    if kind == "binary-blobs":
        return binary_blobs(side, seed, blob_fraction)
    if kind == "flat":
        return flat(side)
    if kind == "impulse":
        return impulse(side)
    raise ValueError(f"unknown phantom kind {kind!r}")
