"""Re-illuminating masked foregrounds through the standard condition."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .color import CLIP_MAX, ColorTransform, apply_transform
from .errors import DimensionMismatch, EmptyMask, InvalidMask, UnreadableImage


@dataclass(frozen=True, eq=False)
class ForegroundMask:
    """Binary (H, W) foreground mask with at least one foreground pixel."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.array(self.pixels, dtype=bool)
        if p.ndim != 2:
            raise InvalidMask(f"mask must be 2-D, got shape {p.shape}")
        if not p.any():
            raise EmptyMask("mask has no foreground pixels")
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)

    @property
    def shape(self):
        return self.pixels.shape

    @property
    def count(self) -> int:
        return int(self.pixels.sum())

    def crop(self, box) -> ForegroundMask:
        x0, y0, x1, y1 = box
        return ForegroundMask(self.pixels[y0:y1, x0:x1])

    def to_uint8(self) -> np.ndarray:
        return np.where(self.pixels, 255, 0).astype(np.uint8)


def as_mask(mask) -> ForegroundMask:
    return mask if isinstance(mask, ForegroundMask) else ForegroundMask(mask)


def load_mask(path) -> ForegroundMask:
    """Read a single-channel 0/255 mask image."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "1", "P"):
                raise InvalidMask(f"{path}: mask must be single-channel, got mode {im.mode}")
            arr = np.asarray(im.convert("L"))
    except OSError as exc:
        raise UnreadableImage(f"{path}: {exc}") from exc
    bad = (arr != 0) & (arr != 255)
    if bad.any():
        raise InvalidMask(f"{path}: {int(bad.sum())} pixels are neither 0 nor 255")
    return ForegroundMask(arr == 255)


def save_mask(path, mask: ForegroundMask) -> None:
    Image.fromarray(mask.to_uint8(), mode="L").save(Path(path))


def _check_dims(image, mask):
    if image.shape[:2] != mask.shape:
        raise DimensionMismatch(f"image {image.shape[:2]} vs mask {mask.shape}")


def transfer_region(image, mask, t: ColorTransform, clip_max: float = CLIP_MAX) -> np.ndarray:
    """Apply ``t`` to foreground pixels; background pixels are copied untouched."""
    mask = as_mask(mask)
    image = np.asarray(image)
    _check_dims(image, mask)
    out = image.astype(np.float64, copy=True)
    sel = mask.pixels
    out[sel] = apply_transform(t, out[sel], clip_max)
    return out


def transitive_transfer(image_a, mask, forward_a: ColorTransform, inverse_b: ColorTransform,
                        clip_max: float = CLIP_MAX) -> np.ndarray:
    """Move the foreground of ``image_a`` into the illumination of image b.

    The foreground goes to the standard condition through ``forward_a``
    (clipped at ``clip_max``), then to b's condition through ``inverse_b``
    (clipped to [0, 1]).
    """
    if forward_a.feature_spec != inverse_b.feature_spec:
        raise ValueError("forward and inverse transforms use different feature specs")
    standard = transfer_region(image_a, mask, forward_a, clip_max)
    return transfer_region(standard, mask, inverse_b, 1.0)
