"""Read checker patches from a perspective-distorted photo.

The checker is drawn onto an arbitrary quadrilateral, then read back with the
annotated corners.  Corners go TL, TR, BR, BL with the brown "dark skin"
patch at the top left.

    python demos/02_patch_extraction.py
"""
import numpy as np

from illumtransfer import CheckerAnnotation, quad_to_grid_homography, read_reference_colors, sample_patch_colors
from illumtransfer.patches import GRID_CORNERS, project

standard = read_reference_colors()
corners = np.array([[52.0, 40.0], [300.0, 66.0], [284.0, 221.0], [61.0, 196.0]])
ann = CheckerAnnotation(corners, "tilted")

H = quad_to_grid_homography(ann)
print("homography (grid -> pixels):\n", H.round(4))
print("grid corners land on:\n", project(H, GRID_CORNERS).round(6))

# render by mapping each pixel center back into grid space
w, h = 340, 260
ys, xs = np.mgrid[0:h, 0:w]
uvw = np.stack([xs + 0.5, ys + 0.5, np.ones_like(xs, float)], -1) @ np.linalg.inv(H).T
u, v = uvw[..., 0] / uvw[..., 2], uvw[..., 1] / uvw[..., 2]
img = np.full((h, w, 3), 0.3)
inside = (u >= 0) & (u < 6) & (v >= 0) & (v < 4)
img[inside] = standard.colors[np.floor(v[inside]).astype(int) * 6 + np.floor(u[inside]).astype(int)]

# specks of dust: the 10% trimmed mean shrugs them off
rng = np.random.default_rng(1)
dust = rng.random((h, w)) < 0.03
img[dust] = 1.0

got = sample_patch_colors(img, ann)
print("max abs error over 72 channels:", np.abs(got.colors - standard.colors).max())

# a half-turn relabeling of the corners reverses the patch order
turned = sample_patch_colors(img, ann.rotated(2))
print("half turn reverses order:", np.allclose(turned.colors, got.colors[::-1]))
