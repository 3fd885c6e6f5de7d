"""Manifest and record types, with JSON (de)serialization.

A manifest is a human-editable JSON file::

    {
      "seed": 0,
      "references_per_foreground": 10,
      "config": {"degree": 2, "ridge": 0.0001, ...},
      "reference_colors": null,
      "annotations": "checkers.txt",
      "images": [
        {"image_id": "a001", "path": "img/a001.png", "split": "train",
         "masks": ["masks/a001_0.png"],
         "checker": [x_tl, y_tl, x_tr, y_tr, x_br, y_br, x_bl, y_bl],
         "exclude": null}
      ]
    }

Relative paths resolve against the manifest's directory.  ``checker`` may be
omitted when an ``annotations`` file supplies the corners.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .color import CLIP_MAX, FeatureSpec
from .compositing import CHECKER_MARGIN, MIN_CROP_FRACTION
from .errors import ManifestError
from .fitting import DEFAULT_RIDGE
from .patches import CheckerAnnotation, read_annotations

EXCLUSION_FLAGS = ("duplicate", "misleading_checker", "checker_central")
SPLITS = ("train", "test", "unassigned")


@dataclass(frozen=True)
class Config:
    degree: int = 2
    include_bias: bool = True
    ridge: float = DEFAULT_RIDGE
    clip_max: float = CLIP_MAX
    duplicate_threshold: int = 8
    checker_margin: int = CHECKER_MARGIN
    min_crop_fraction: float = MIN_CROP_FRACTION
    # fit RMSE above this is reported for review, never auto-rejected
    residual_warning: float = 0.05

    @property
    def feature_spec(self) -> FeatureSpec:
        return FeatureSpec(self.degree, self.include_bias)


@dataclass(frozen=True)
class Exclusion:
    flag: str
    reason: str = ""

    def __post_init__(self):
        if self.flag not in EXCLUSION_FLAGS:
            raise ManifestError(f"unknown exclusion flag {self.flag!r}")


@dataclass(frozen=True)
class ImageRecord:
    image_id: str
    path: str
    annotation: CheckerAnnotation | None = None
    masks: tuple[str, ...] = ()
    exclusion: Exclusion | None = None
    split: str = "unassigned"

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(self.masks))
        if self.split not in SPLITS:
            raise ManifestError(f"{self.image_id}: unknown split {self.split!r}")

    @property
    def excluded(self) -> bool:
        return self.exclusion is not None

    def to_json(self):
        d = {"image_id": self.image_id, "path": self.path, "split": self.split,
             "masks": list(self.masks)}
        if self.annotation is not None:
            d["checker"] = [float(v) for v in self.annotation.corners.ravel()]
        d["exclude"] = dataclasses.asdict(self.exclusion) if self.exclusion else None
        return d


@dataclass(frozen=True)
class PairRecord:
    composite: str
    real_image: str
    mask: str
    source_id: str
    reference_id: str
    fg_index: int
    split: str
    forward_fingerprint: str
    inverse_fingerprint: str
    forward_residual: float
    inverse_residual: float

    @property
    def pair_id(self) -> str:
        return f"{self.source_id}_{self.fg_index}_{self.reference_id}"


@dataclass
class Manifest:
    records: list[ImageRecord]
    seed: int = 0
    references_per_foreground: int = 10
    config: Config = field(default_factory=Config)
    reference_colors: str | None = None
    base_dir: Path = field(default_factory=Path)

    def __post_init__(self):
        ids = [r.image_id for r in self.records]
        if len(set(ids)) != len(ids):
            dup = sorted({i for i in ids if ids.count(i) > 1})
            raise ManifestError(f"duplicate image ids: {dup}")
        for r in self.records:
            if not r.excluded and not r.masks:
                raise ManifestError(f"{r.image_id}: needs at least one mask unless excluded")
        self._by_id = {r.image_id: r for r in self.records}

    def __getitem__(self, image_id) -> ImageRecord:
        return self._by_id[image_id]

    def active(self) -> list[ImageRecord]:
        return [r for r in self.records if not r.excluded]

    def resolve(self, path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p

    def replace_record(self, record: ImageRecord) -> Manifest:
        records = [record if r.image_id == record.image_id else r for r in self.records]
        return dataclasses.replace(self, records=records)

    def with_overrides(self, **kw) -> Manifest:
        """Copy with top-level fields (seed, references_per_foreground) or config keys replaced."""
        top = {k: v for k, v in kw.items() if k in ("seed", "references_per_foreground") and v is not None}
        cfg = {k: v for k, v in kw.items() if k not in top and v is not None}
        return dataclasses.replace(self, config=dataclasses.replace(self.config, **cfg), **top)

    def to_json(self):
        return {
            "seed": self.seed,
            "references_per_foreground": self.references_per_foreground,
            "config": dataclasses.asdict(self.config),
            "reference_colors": self.reference_colors,
            "images": [r.to_json() for r in self.records],
        }


def _record_from_json(d, annotations) -> ImageRecord:
    try:
        image_id = str(d["image_id"])
        path = d["path"]
    except KeyError as exc:
        raise ManifestError(f"image record missing {exc}") from None
    ann = None
    if d.get("checker") is not None:
        ann = CheckerAnnotation(np.asarray(d["checker"], dtype=np.float64), image_id)
    elif image_id in annotations:
        ann = annotations[image_id]
    exc = d.get("exclude")
    exclusion = Exclusion(exc["flag"], exc.get("reason", "")) if exc else None
    return ImageRecord(image_id, path, ann, tuple(d.get("masks", ())), exclusion,
                       d.get("split", "unassigned"))


def manifest_from_json(data, base_dir=".") -> Manifest:
    base_dir = Path(base_dir)
    annotations = {}
    if data.get("annotations"):
        ann_path = Path(data["annotations"])
        annotations = read_annotations(ann_path if ann_path.is_absolute() else base_dir / ann_path)
    known = {f.name for f in dataclasses.fields(Config)}
    unknown = set(data.get("config", {})) - known
    if unknown:
        raise ManifestError(f"unknown config keys: {sorted(unknown)}")
    return Manifest(
        records=[_record_from_json(d, annotations) for d in data.get("images", [])],
        seed=int(data.get("seed", 0)),
        references_per_foreground=int(data.get("references_per_foreground", 10)),
        config=Config(**data.get("config", {})),
        reference_colors=data.get("reference_colors"),
        base_dir=base_dir,
    )


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    return manifest_from_json(data, path.parent)


def save_manifest(manifest: Manifest, path) -> None:
    Path(path).write_text(json.dumps(manifest.to_json(), indent=2) + "\n")
