"""Fit checker transforms and move a foreground between two illuminations.

A synthetic scene is rendered under two diagonal illuminants, each with a
color checker in the corner.  We read the 24 patches from each rendering,
fit the forward (image -> standard) and inverse (standard -> image) maps,
and carry the foreground of the first rendering into the second's light.

    python demos/01_fit_and_transfer.py
"""
import numpy as np

from illumtransfer import (
    CheckerAnnotation,
    fit_pair,
    fit_residual,
    read_reference_colors,
    sample_patch_colors,
    transitive_transfer,
)

rng = np.random.default_rng(0)
standard = read_reference_colors()
print("standard patch 1 (dark skin), linear RGB:", standard.colors[0].round(4))

# a scene of flat random-colored tiles
h, w, cell = 120, 160, 10
tiles = rng.uniform(0.05, 0.9, size=(h // 20, w // 20, 3))
reflectance = np.kron(tiles, np.ones((20, 20, 1)))


def render(illuminant):
    img = reflectance * illuminant
    ox, oy = w - 6 * cell - 2, h - 4 * cell - 2
    for k in range(24):
        r, c = divmod(k, 6)
        img[oy + r * cell:oy + (r + 1) * cell, ox + c * cell:ox + (c + 1) * cell] = \
            standard.colors[k] * illuminant
    corners = [ox, oy, ox + 6 * cell, oy, ox + 6 * cell, oy + 4 * cell, ox, oy + 4 * cell]
    return img, CheckerAnnotation(corners)


tungsten = np.array([1.0, 0.78, 0.5])
daylight = np.array([0.7, 0.85, 1.0])
img_a, ann_a = render(tungsten)
img_b, ann_b = render(daylight)

# 1. patch colors as seen in each photo
patches_a = sample_patch_colors(img_a, ann_a)
patches_b = sample_patch_colors(img_b, ann_b)

# 2. forward and inverse matching matrices (degree-2 polynomial, ridge 1e-4)
fwd_a, inv_a = fit_pair(standard, patches_a)
fwd_b, inv_b = fit_pair(standard, patches_b)
print("forward fit RMSE (a):", f"{fit_residual(fwd_a, patches_a, standard):.2e}")
print("forward matrix (a), linear block:\n", fwd_a.matrix[:, :3].round(3))

# 3. transfer a rectangular foreground a -> standard -> b
mask = np.zeros((h, w), bool)
mask[20:60, 20:90] = True
moved = transitive_transfer(img_a, mask, fwd_a, inv_b)

err = np.sqrt(np.mean((moved[mask] - img_b[mask]) ** 2))
print(f"foreground RMSE against the true daylight rendering: {err:.4f}")
print("background untouched:", np.array_equal(moved[~mask], img_a[~mask]))

# 4. self-reference round trip a -> standard -> a
back = transitive_transfer(img_a, mask, fwd_a, inv_a)
print(f"round-trip mean abs error: {np.mean(np.abs(back[mask] - img_a[mask])):.5f}")
