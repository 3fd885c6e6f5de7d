import math

import numpy as np
import pytest

from illumtransfer.errors import DimensionMismatch, EmptyMask
from illumtransfer.metrics import fmse, mse, psnr


def test_identical():
    a = np.arange(48, dtype=np.uint8).reshape(4, 4, 3)
    assert mse(a, a) == 0
    assert psnr(a, a) == math.inf


def test_black_vs_white():
    a = np.zeros((5, 5, 3), np.uint8)
    b = np.full((5, 5, 3), 255, np.uint8)
    assert mse(a, b) == 65025
    assert psnr(a, b) == 0.0


def test_fmse_on_differing_half():
    a = np.full((4, 6, 3), 100, np.uint8)
    b = a.copy()
    b[:, :3] += 10
    mask = np.zeros((4, 6), bool)
    mask[:, :3] = True
    assert fmse(a, b, mask) == 100
    assert mse(a, b) == 50


def test_symmetry_and_full_mask(rng):
    a = rng.integers(0, 256, (8, 8, 3))
    b = rng.integers(0, 256, (8, 8, 3))
    mask = rng.random((8, 8)) < 0.5
    mask[0, 0] = True
    assert mse(a, b) == mse(b, a)
    assert fmse(a, b, mask) == fmse(b, a, mask)
    assert psnr(a, b) == psnr(b, a)
    assert fmse(a, b, np.ones((8, 8), bool)) == pytest.approx(mse(a, b), rel=1e-15)


def test_psnr_decreases_with_mse():
    a = np.zeros((4, 4, 3), np.uint8)
    ladder = [psnr(a, np.full_like(a, k)) for k in (1, 2, 5, 20, 100, 255)]
    assert all(x > y for x, y in zip(ladder, ladder[1:]))


def test_errors():
    a = np.zeros((4, 4, 3))
    with pytest.raises(DimensionMismatch):
        mse(a, np.zeros((4, 5, 3)))
    with pytest.raises(EmptyMask):
        fmse(a, a, np.zeros((4, 4), bool))
    with pytest.raises(DimensionMismatch):
        fmse(a, a, np.ones((3, 4), bool))
