"""Color types, sRGB linearization and polynomial color transforms.

Everything downstream works in linear RGB.  Colors are plain float arrays
whose last axis has length 3, so the same functions handle a single color,
a patch set or a whole image.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

N_PATCHES = 24
GRID_COLS = 6
GRID_ROWS = 4

# intermediate results (standard-condition foregrounds) may exceed 1.0
CLIP_MAX = 4.0

PATCH_NAMES = (
    "dark skin", "light skin", "blue sky", "foliage", "blue flower", "bluish green",
    "orange", "purplish blue", "moderate red", "purple", "yellow green", "orange yellow",
    "blue", "green", "red", "yellow", "magenta", "cyan",
    "white", "neutral 8", "neutral 6.5", "neutral 5", "neutral 3.5", "black",
)


def srgb_to_linear(srgb):
    """Decode 8-bit sRGB values (any shape) to linear light in [0, 1]."""
    v = np.asarray(srgb, dtype=np.float64) / 255.0
    v = np.clip(v, 0.0, 1.0)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def linear_to_srgb(linear):
    """Encode linear values to 8-bit sRGB, clipping to [0, 1] first.

    Round-trips byte-exactly with :func:`srgb_to_linear`.
    """
    v = np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0)
    enc = np.where(v <= 0.0031308, v * 12.92, 1.055 * v ** (1 / 2.4) - 0.055)
    return np.round(enc * 255.0).astype(np.uint8)


@dataclass(frozen=True, eq=False)
class LinearColor:
    r: float
    g: float
    b: float

    def __post_init__(self):
        vals = (self.r, self.g, self.b)
        if not all(np.isfinite(vals)):
            raise ValueError(f"non-finite color {vals}")
        if min(vals) < 0:
            raise ValueError(f"negative color {vals}")

    def __iter__(self):
        return iter((self.r, self.g, self.b))

    def __array__(self, dtype=None, copy=None):
        return np.array([self.r, self.g, self.b], dtype=dtype or np.float64)

    def __eq__(self, other):
        return tuple(self) == tuple(other)

    def __hash__(self):
        return hash(tuple(self))


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class PatchSet:
    """The 24 linear patch colors of one checker, row-major over the 6x4 grid.

    Index 0 is the top-left "dark skin" patch, index 23 the bottom-right black.
    """

    colors: np.ndarray

    def __post_init__(self):
        c = _frozen(self.colors)
        if c.shape != (N_PATCHES, 3):
            raise ValueError(f"expected ({N_PATCHES}, 3) patch colors, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("patch colors must be finite")
        if np.any(c < 0):
            raise ValueError("patch colors must be non-negative")
        object.__setattr__(self, "colors", c)

    @classmethod
    def from_srgb8(cls, values) -> PatchSet:
        return cls(srgb_to_linear(values))

    def __len__(self):
        return N_PATCHES

    def __getitem__(self, i) -> LinearColor:
        return LinearColor(*self.colors[i])

    def __eq__(self, other):
        return isinstance(other, PatchSet) and np.array_equal(self.colors, other.colors)

    def scaled(self, factor) -> PatchSet:
        return PatchSet(self.colors * np.asarray(factor, dtype=np.float64))


def read_reference_colors(path: str | Path | None = None) -> PatchSet:
    """Load standard patch colors from an ``index r g b`` text file.

    With no path, the bundled ColorChecker Classic values are used.  Values in
    the file are 8-bit sRGB; the returned set is linear.
    """
    if path is None:
        text = resources.files("illumtransfer").joinpath("data/colorchecker_classic.txt").read_text()
    else:
        text = Path(path).read_text()
    rows = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"line {lineno}: expected 'index r g b', got {line!r}")
        idx, *rgb = (int(p) for p in parts)
        if not 1 <= idx <= N_PATCHES or idx in rows:
            raise ValueError(f"line {lineno}: bad or repeated patch index {idx}")
        if any(not 0 <= v <= 255 for v in rgb):
            raise ValueError(f"line {lineno}: channel out of 8-bit range")
        rows[idx] = rgb
    if len(rows) != N_PATCHES:
        raise ValueError(f"expected {N_PATCHES} patches, found {len(rows)}")
    return PatchSet.from_srgb8([rows[i] for i in range(1, N_PATCHES + 1)])


@dataclass(frozen=True)
class FeatureSpec:
    """Polynomial basis for color matching.

    Degree 2 with bias expands (r, g, b) to (r, g, b, r², g², b², rg, gb, rb, 1).
    """

    degree: int = 2
    include_bias: bool = True

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValueError(f"degree must be 1 or 2, got {self.degree}")

    @property
    def term_count(self) -> int:
        return (3 if self.degree == 1 else 9) + int(self.include_bias)


def expand_features(c, spec: FeatureSpec) -> np.ndarray:
    """Polynomial feature expansion along the last axis."""
    c = np.asarray(c, dtype=np.float64)
    r, g, b = c[..., 0], c[..., 1], c[..., 2]
    terms = [r, g, b]
    if spec.degree == 2:
        terms += [r * r, g * g, b * b, r * g, g * b, r * b]
    if spec.include_bias:
        terms.append(np.ones_like(r))
    return np.stack(terms, axis=-1)


@dataclass(frozen=True, eq=False)
class ColorTransform:
    """A fitted polynomial matching matrix (3 x term_count) and its basis."""

    matrix: np.ndarray
    feature_spec: FeatureSpec = FeatureSpec()

    def __post_init__(self):
        m = _frozen(self.matrix)
        if m.shape != (3, self.feature_spec.term_count):
            raise ValueError(
                f"matrix shape {m.shape} does not match {self.feature_spec.term_count} terms"
            )
        if not np.all(np.isfinite(m)):
            raise ValueError("transform matrix must be finite")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls, spec: FeatureSpec = FeatureSpec()) -> ColorTransform:
        m = np.zeros((3, spec.term_count))
        m[:, :3] = np.eye(3)
        return cls(m, spec)

    def __eq__(self, other):
        return (
            isinstance(other, ColorTransform)
            and self.feature_spec == other.feature_spec
            and np.array_equal(self.matrix, other.matrix)
        )

    def __call__(self, c, clip_max=CLIP_MAX):
        return apply_transform(self, c, clip_max)


def apply_transform(t: ColorTransform, c, clip_max: float = CLIP_MAX) -> np.ndarray:
    """Map colors through ``t`` and clip every channel to [0, clip_max]."""
    out = expand_features(c, t.feature_spec) @ t.matrix.T
    return np.clip(out, 0.0, clip_max)
