"""MSE, foreground MSE and PSNR on the 8-bit scale."""
from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch, EmptyMask


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def fmse(a, b, mask) -> float:
    """MSE over the pixels selected by ``mask`` (all channels)."""
    a, b = _pair(a, b)
    mask = np.asarray(getattr(mask, "pixels", mask), dtype=bool)
    if mask.shape != a.shape[:2]:
        raise DimensionMismatch(f"mask {mask.shape} vs image {a.shape[:2]}")
    if not mask.any():
        raise EmptyMask("fmse needs at least one foreground pixel")
    return float(np.mean((a[mask] - b[mask]) ** 2))


def psnr(a, b) -> float:
    """Peak SNR in dB against a 255 peak; ``inf`` for identical images."""
    err = mse(a, b)
    if err == 0:
        return math.inf
    return 10 * math.log10(255.0 ** 2 / err)
