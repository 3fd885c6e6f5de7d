"""Homography-based sampling of the 24 checker patch colors.

The checker is addressed in grid coordinates: the chart spans [0, 6] x [0, 4]
with cell (row, col) occupying [col, col+1] x [row, row+1].  An annotation
gives the four outer corners in image pixels; pixel (i, j) covers the
continuous square [j, j+1) x [i, i+1).
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .color import GRID_COLS, GRID_ROWS, N_PATCHES, PatchSet
from .errors import DegenerateQuad, PatchOutOfBounds

LATTICE = 16
CELL_MARGIN = 0.25
TRIM = 0.10

GRID_CORNERS = np.array(
    [[0, 0], [GRID_COLS, 0], [GRID_COLS, GRID_ROWS], [0, GRID_ROWS]], dtype=np.float64
)


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True, eq=False)
class CheckerAnnotation:
    """Outer checker corners ordered TL, TR, BR, BL (dark skin at TL)."""

    corners: np.ndarray
    image_id: str = ""

    def __post_init__(self):
        c = np.array(self.corners, dtype=np.float64).reshape(4, 2)
        if not np.all(np.isfinite(c)):
            raise DegenerateQuad(f"{self.image_id}: non-finite corner")
        # y points down, so TL->TR->BR->BL has positive shoelace area
        turns = [_cross(c[i], c[(i + 1) % 4], c[(i + 2) % 4]) for i in range(4)]
        area = 0.5 * sum(c[i, 0] * c[(i + 1) % 4, 1] - c[(i + 1) % 4, 0] * c[i, 1] for i in range(4))
        if min(turns) <= 1e-9 or area <= 1e-9:
            raise DegenerateQuad(f"{self.image_id}: corners do not form a convex TL,TR,BR,BL quad")
        c.setflags(write=False)
        object.__setattr__(self, "corners", c)

    def __eq__(self, other):
        return (
            isinstance(other, CheckerAnnotation)
            and self.image_id == other.image_id
            and np.array_equal(self.corners, other.corners)
        )

    def within(self, width, height) -> bool:
        c = self.corners
        return bool(np.all(c >= 0) and np.all(c[:, 0] <= width) and np.all(c[:, 1] <= height))

    def translated(self, dx, dy) -> CheckerAnnotation:
        return CheckerAnnotation(self.corners + [dx, dy], self.image_id)

    def rotated(self, steps=1) -> CheckerAnnotation:
        """Relabel the corners cyclically: new TL is the old corner ``steps`` ahead."""
        return CheckerAnnotation(np.roll(self.corners, -steps, axis=0), self.image_id)

    def bbox(self, margin=0.0):
        """Integer (x0, y0, x1, y1) box around the corners, grown by ``margin`` px."""
        lo = np.floor(self.corners.min(axis=0) - margin).astype(int)
        hi = np.ceil(self.corners.max(axis=0) + margin).astype(int)
        return int(lo[0]), int(lo[1]), int(hi[0]), int(hi[1])

    def to_fields(self):
        return [self.image_id] + [repr(float(v)) for v in self.corners.ravel()]


def homography_from_points(src, dst) -> np.ndarray:
    """Exact 4-point projective map src -> dst with h33 fixed to 1."""
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    a = np.zeros((8, 8))
    rhs = np.zeros(8)
    for k, ((u, v), (x, y)) in enumerate(zip(src, dst)):
        a[2 * k] = [u, v, 1, 0, 0, 0, -u * x, -v * x]
        a[2 * k + 1] = [0, 0, 0, u, v, 1, -u * y, -v * y]
        rhs[2 * k], rhs[2 * k + 1] = x, y
    try:
        h = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateQuad("point correspondences are degenerate") from exc
    H = np.append(h, 1.0).reshape(3, 3)
    if abs(np.linalg.det(H)) <= 1e-12:
        raise DegenerateQuad("homography is singular")
    return H


def quad_to_grid_homography(ann: CheckerAnnotation) -> np.ndarray:
    """Homography taking grid coordinates [0,6]x[0,4] onto the annotated quad."""
    return homography_from_points(GRID_CORNERS, ann.corners)


def project(H, pts) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64)
    h = np.concatenate([pts, np.ones(pts.shape[:-1] + (1,))], axis=-1) @ H.T
    return h[..., :2] / h[..., 2:]


def lattice_offsets(n=LATTICE, margin=CELL_MARGIN) -> np.ndarray:
    """Sample positions within a unit cell, centered in the [margin, 1-margin] core."""
    return margin + (np.arange(n) + 0.5) / n * (1 - 2 * margin)


def grid_sample_points(n=LATTICE, margin=CELL_MARGIN) -> np.ndarray:
    """Grid-space sample points, shape (24, n*n, 2), patches row-major."""
    off = lattice_offsets(n, margin)
    du, dv = np.meshgrid(off, off)
    cell = np.stack([du.ravel(), dv.ravel()], axis=-1)
    rows, cols = np.divmod(np.arange(N_PATCHES), GRID_COLS)
    origins = np.stack([cols, rows], axis=-1).astype(np.float64)
    return origins[:, None, :] + cell[None, :, :]


def trimmed_mean(values, proportion=TRIM, axis=0) -> np.ndarray:
    v = np.sort(np.asarray(values, dtype=np.float64), axis=axis)
    n = v.shape[axis]
    k = int(proportion * n)
    kept = np.take(v, np.arange(k, n - k), axis=axis)
    # pin the mean inside the kept range so constant samples come back exactly
    return np.clip(kept.mean(axis=axis), kept.min(axis=axis), kept.max(axis=axis))


def sample_patch_colors(image, ann: CheckerAnnotation) -> PatchSet:
    """Trimmed-mean color of the central half of each of the 24 cells.

    ``image`` is an (H, W, 3) linear raster.  Each cell is read on a fixed
    16x16 lattice of nearest pixels; 10% is trimmed from each tail per channel.
    """
    image = np.asarray(image)
    h, w = image.shape[:2]
    pix = project(quad_to_grid_homography(ann), grid_sample_points())
    ij = np.floor(pix).astype(np.int64)
    x, y = ij[..., 0], ij[..., 1]
    bad = (x < 0) | (x >= w) | (y < 0) | (y >= h)
    if bad.any():
        patch = int(np.argwhere(bad)[0, 0]) + 1
        raise PatchOutOfBounds(
            f"{ann.image_id}: patch {patch} samples fall outside the {w}x{h} image"
        )
    samples = image[y, x].astype(np.float64)
    return PatchSet(trimmed_mean(samples, axis=1))


def read_annotations(path) -> dict[str, CheckerAnnotation]:
    """Parse ``image_id x_tl y_tl x_tr y_tr x_br y_br x_bl y_bl`` records."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 9:
            raise ValueError(f"{path}:{lineno}: expected image_id and 8 coordinates")
        image_id = parts[0]
        if image_id in out:
            raise ValueError(f"{path}:{lineno}: duplicate image_id {image_id}")
        out[image_id] = CheckerAnnotation(np.array(parts[1:], dtype=np.float64), image_id)
    return out


def write_annotations(path, annotations) -> None:
    lines = [" ".join(a.to_fields()) for a in annotations]
    Path(path).write_text("\n".join(lines) + "\n")
