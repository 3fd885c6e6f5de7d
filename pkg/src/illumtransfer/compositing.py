"""Composite assembly and checker-free cropping."""
from __future__ import annotations

import numpy as np

from .errors import CheckerDominates, DimensionMismatch

MIN_CROP_FRACTION = 0.25
CHECKER_MARGIN = 10


def composite(foreground_img, background_img, mask) -> np.ndarray:
    """Pick ``foreground_img`` inside the mask and ``background_img`` elsewhere.

    ``mask`` may be a ForegroundMask or any boolean array (an empty one
    returns the background).
    """
    mask = np.asarray(getattr(mask, "pixels", mask), dtype=bool)
    fg = np.asarray(foreground_img, dtype=np.float64)
    bg = np.asarray(background_img, dtype=np.float64)
    if fg.shape != bg.shape or fg.shape[:2] != mask.shape:
        raise DimensionMismatch(f"foreground {fg.shape}, background {bg.shape}, mask {mask.shape}")
    sel = mask[..., None] if fg.ndim == 3 else mask
    return np.clip(np.where(sel, fg, bg), 0.0, 1.0)


def crop_candidates(width, height, bbox):
    """The four full-extent rectangles left, right, above and below ``bbox``."""
    x0, y0, x1, y1 = bbox
    return [
        (0, 0, x0, height),
        (x1, 0, width, height),
        (0, 0, width, y0),
        (0, y1, width, height),
    ]


def rect_area(r) -> int:
    return max(0, r[2] - r[0]) * max(0, r[3] - r[1])


def crop_excluding_checker(width, height, checker_bbox, min_fraction=MIN_CROP_FRACTION):
    """Largest axis-aligned (x0, y0, x1, y1) crop that avoids ``checker_bbox``.

    Ties go to the wider rectangle, then the topmost, then the leftmost.
    Raises CheckerDominates when the best crop keeps less than
    ``min_fraction`` of the image.
    """
    x0, y0, x1, y1 = checker_bbox
    if not (0 <= x0 < x1 <= width and 0 <= y0 < y1 <= height):
        raise ValueError(f"checker bbox {checker_bbox} not inside {width}x{height} image")
    best = max(
        crop_candidates(width, height, checker_bbox),
        key=lambda r: (rect_area(r), r[2] - r[0], -r[1], -r[0]),
    )
    fraction = rect_area(best) / (width * height)
    if fraction < min_fraction:
        raise CheckerDominates(
            f"best checker-free crop keeps {fraction:.1%} of the image", best, fraction
        )
    return best


def checker_bbox(ann, width, height, margin=CHECKER_MARGIN):
    """Annotation bounding box grown by ``margin`` px and clipped to the image."""
    x0, y0, x1, y1 = ann.bbox(margin)
    return max(0, x0), max(0, y0), min(width, x1), min(height, y1)


def crop_image(image, box):
    x0, y0, x1, y1 = box
    return np.asarray(image)[y0:y1, x0:x1]
