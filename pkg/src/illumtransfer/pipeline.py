"""Manifest-driven dataset construction.

Screening (near-duplicates, checker-free crops), deterministic reference
selection, pair generation and validation of a finished output directory.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path

import numpy as np
from PIL import Image

from .color import linear_to_srgb, read_reference_colors, srgb_to_linear
from .compositing import checker_bbox, composite, crop_excluding_checker, crop_image
from .errors import CheckerDominates, IllumTransferError, InsufficientPool, ManifestError, UnreadableImage
from .fitting import fit_pair, fit_residual, read_transform, transform_fingerprint, write_transform
from .manifest import Exclusion, Manifest, PairRecord
from .metrics import fmse, mse, psnr
from .patches import sample_patch_colors
from .transfer import load_mask, save_mask, transitive_transfer

log = logging.getLogger(__name__)

COMPOSITE_DIR = "composite_images"
REAL_DIR = "real_images"
MASK_DIR = "masks"
TRANSFORM_DIR = "transforms"


def load_srgb8(path) -> np.ndarray:
    """Read an image as an (H, W, 3) uint8 sRGB array."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except (OSError, ValueError) as exc:
        raise UnreadableImage(f"{path}: {exc}") from exc


def save_srgb8(path, arr) -> None:
    Image.fromarray(np.asarray(arr, dtype=np.uint8), mode="RGB").save(Path(path))


# ---------------------------------------------------------------- duplicates

def dhash(image, size=8) -> int:
    """64-bit difference hash: sign of horizontal gradients on a 9x8 grayscale thumbnail."""
    im = image if isinstance(image, Image.Image) else Image.fromarray(np.asarray(image, dtype=np.uint8))
    thumb = np.asarray(im.convert("L").resize((size + 1, size), Image.BILINEAR), dtype=np.int16)
    bits = (thumb[:, 1:] > thumb[:, :-1]).ravel()
    return int(sum(1 << i for i, b in enumerate(bits) if b))


def hamming(a: int, b: int) -> int:
    return (a ^ b).bit_count()


def near_duplicate_scan(manifest: Manifest, threshold=None):
    """All (id_a, id_b, distance) with dhash distance <= threshold, id_a < id_b."""
    threshold = manifest.config.duplicate_threshold if threshold is None else threshold
    hashes = {r.image_id: dhash(load_srgb8(manifest.resolve(r.path))) for r in manifest.records}
    pairs = []
    for a, b in combinations(sorted(hashes), 2):
        d = hamming(hashes[a], hashes[b])
        if d <= threshold:
            pairs.append((a, b, d))
    return pairs


def flag_duplicates(manifest: Manifest, pairs) -> Manifest:
    """Mark the lexicographically later id of each pair as a duplicate (unless already excluded)."""
    for a, b, d in pairs:
        rec = manifest[b]
        if not rec.excluded:
            ex = Exclusion("duplicate", f"dhash distance {d} to {a}")
            manifest = manifest.replace_record(dataclasses.replace(rec, exclusion=ex))
    return manifest


# ---------------------------------------------------------------- cropping

def image_crop(manifest: Manifest, record, width, height):
    ann = record.annotation
    if ann is None:
        raise ManifestError(f"{record.image_id}: no checker annotation")
    bbox = checker_bbox(ann, width, height, manifest.config.checker_margin)
    return crop_excluding_checker(width, height, bbox, manifest.config.min_crop_fraction)


def image_size(path):
    try:
        with Image.open(path) as im:
            return im.size
    except OSError as exc:
        raise UnreadableImage(f"{path}: {exc}") from exc


def crop_scan(manifest: Manifest):
    """Crop box per image; images whose checker dominates are flagged ``checker_central``.

    Returns (updated manifest, {image_id: box or None}).
    """
    boxes = {}
    for rec in manifest.records:
        w, h = image_size(manifest.resolve(rec.path))
        try:
            boxes[rec.image_id] = image_crop(manifest, rec, w, h)
        except CheckerDominates as exc:
            boxes[rec.image_id] = None
            if not rec.excluded:
                ex = Exclusion("checker_central", str(exc))
                manifest = manifest.replace_record(dataclasses.replace(rec, exclusion=ex))
    return manifest, boxes


# ---------------------------------------------------------------- references

def _rng_for(seed, image_id, fg_index):
    digest = hashlib.sha256(f"{seed}\x00{image_id}\x00{fg_index}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:16], "little"))


def reference_pool(manifest: Manifest, image_id):
    split = manifest[image_id].split
    return sorted(r.image_id for r in manifest.active()
                  if r.split == split and r.image_id != image_id)


def select_references(manifest: Manifest, image_id, fg_index):
    """Draw distinct same-split reference ids for one foreground, reproducibly."""
    rec = manifest[image_id]
    if rec.split == "unassigned":
        raise ManifestError(f"{image_id}: split must be assigned before pairing")
    k = manifest.references_per_foreground
    pool = reference_pool(manifest, image_id)
    if len(pool) < k:
        raise InsufficientPool(f"{image_id}: {len(pool)} same-split images available, need {k}")
    idx = _rng_for(manifest.seed, image_id, fg_index).choice(len(pool), size=k, replace=False)
    return [pool[i] for i in idx]


def plan_pairs(manifest: Manifest):
    """(source_id, fg_index, reference_id, split) for every pair the build will emit."""
    plan = []
    for rec in manifest.active():
        for fg in range(len(rec.masks)):
            for ref in select_references(manifest, rec.image_id, fg):
                plan.append((rec.image_id, fg, ref, rec.split))
    return plan


def dry_run(manifest: Manifest):
    plan = plan_pairs(manifest)
    fgs = Counter()
    for rec in manifest.active():
        fgs[rec.split] += len(rec.masks)
    return {
        "pairs": len(plan),
        "pairs_per_split": dict(sorted(Counter(p[3] for p in plan).items())),
        "foregrounds_per_split": dict(sorted(fgs.items())),
        "images": len(manifest.active()),
        "excluded": len(manifest.records) - len(manifest.active()),
    }


# ---------------------------------------------------------------- building

@dataclass(frozen=True)
class Prepared:
    image_id: str
    crop: tuple
    forward: object
    inverse: object
    forward_residual: float
    inverse_residual: float
    # set when no usable crop exists; the image can still serve as a reference
    crop_error: str | None = None


def _patch_fingerprint(patches) -> str:
    return hashlib.sha256(np.ascontiguousarray(patches.colors, dtype="<f8").tobytes()).hexdigest()[:16]


def prepare_image(manifest: Manifest, record, standard, out_dir=None) -> Prepared:
    """Extract patches, fit (or reload) both transforms, compute the crop."""
    cfg = manifest.config
    img = load_srgb8(manifest.resolve(record.path))
    h, w = img.shape[:2]
    if record.annotation is None:
        raise ManifestError(f"{record.image_id}: no checker annotation")
    patches = sample_patch_colors(srgb_to_linear(img), record.annotation)
    box, crop_error = None, None
    try:
        box = image_crop(manifest, record, w, h)
    except CheckerDominates as exc:
        crop_error = str(exc)
    key = _patch_fingerprint(patches)

    cached = None
    if out_dir is not None:
        tdir = Path(out_dir) / TRANSFORM_DIR
        paths = [tdir / f"{record.image_id}.{d}.txt" for d in ("forward", "inverse")]
        try:
            loaded = [read_transform(p) for p in paths]
        except (OSError, ValueError, KeyError):
            loaded = None  # missing or unreadable cache: refit
        if loaded and all(hd.get("patches") == key and hd["ridge"] == cfg.ridge
                          and t.feature_spec == cfg.feature_spec for t, hd in loaded):
            cached = tuple(t for t, _ in loaded)
    if cached is None:
        cached = fit_pair(standard, patches, cfg.feature_spec, cfg.ridge)
        if out_dir is not None:
            tdir.mkdir(parents=True, exist_ok=True)
            for p, t, d in zip(paths, cached, ("forward", "inverse")):
                write_transform(p, t, record.image_id, d, cfg.ridge, patches=key)
    forward, inverse = cached
    return Prepared(
        record.image_id, box, forward, inverse,
        fit_residual(forward, patches, standard),
        fit_residual(inverse, standard, patches),
        crop_error,
    )


def _build_source(manifest: Manifest, record, jobs, prepared, out_dir):
    """All pairs for one source image.  Returns (pair records, failures)."""
    out_dir = Path(out_dir)
    pairs, failures = [], []
    prep_a = prepared.get(record.image_id)
    if prep_a is None:
        n = sum(len(refs) for _, refs in jobs)
        return pairs, [(record.image_id, f"source preparation failed; {n} pairs skipped")]
    if prep_a.crop is None:
        return pairs, [(record.image_id, prep_a.crop_error)]
    try:
        img = crop_image(load_srgb8(manifest.resolve(record.path)), prep_a.crop)
    except IllumTransferError as exc:
        return pairs, [(record.image_id, str(exc))]
    lin = srgb_to_linear(img)
    for fg, refs in jobs:
        stem = f"{record.image_id}_{fg}"
        try:
            full = load_mask(manifest.resolve(record.masks[fg]))
            x0, y0, x1, y1 = prep_a.crop
            if full.shape[0] < y1 or full.shape[1] < x1:
                raise ManifestError(f"{stem}: mask smaller than source image")
            mask = full.crop(prep_a.crop)
            if mask.shape != img.shape[:2]:
                raise ManifestError(f"{stem}: mask/image size mismatch")
            save_mask(out_dir / MASK_DIR / f"{stem}.png", mask)
            save_srgb8(out_dir / REAL_DIR / f"{stem}.png", img)
        except (IllumTransferError, OSError) as exc:
            failures.append((stem, str(exc)))
            continue
        for ref in refs:
            name = f"{stem}_{ref}"
            prep_b = prepared.get(ref)
            if prep_b is None:
                failures.append((name, f"reference {ref} preparation failed"))
                continue
            try:
                moved = transitive_transfer(lin, mask, prep_a.forward, prep_b.inverse,
                                            manifest.config.clip_max)
                comp = linear_to_srgb(composite(moved, lin, mask))
                save_srgb8(out_dir / COMPOSITE_DIR / f"{name}.png", comp)
            except (IllumTransferError, ValueError, OSError) as exc:
                failures.append((name, str(exc)))
                continue
            pairs.append(PairRecord(
                composite=f"{COMPOSITE_DIR}/{name}.png",
                real_image=f"{REAL_DIR}/{stem}.png",
                mask=f"{MASK_DIR}/{stem}.png",
                source_id=record.image_id,
                reference_id=ref,
                fg_index=fg,
                split=record.split,
                forward_fingerprint=transform_fingerprint(prep_a.forward),
                inverse_fingerprint=transform_fingerprint(prep_b.inverse),
                forward_residual=prep_a.forward_residual,
                inverse_residual=prep_b.inverse_residual,
            ))
    return pairs, failures


def _prepare_safe(args):
    manifest, record, standard, out_dir = args
    try:
        return record.image_id, prepare_image(manifest, record, standard, out_dir), None
    except (IllumTransferError, ValueError, OSError) as exc:
        return record.image_id, None, str(exc)


def _build_safe(args):
    manifest, record, jobs, prepared, out_dir = args
    return _build_source(manifest, record, jobs, prepared, out_dir)


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def build_dataset(manifest: Manifest, out_dir, workers=1):
    """Generate every composite/real pair described by ``manifest``.

    Per-item failures are collected in the report and skipped.  Writes
    ``pairs.json`` and ``summary.json`` into ``out_dir`` and returns
    (pair records, summary dict).
    """
    out_dir = Path(out_dir)
    for sub in (COMPOSITE_DIR, REAL_DIR, MASK_DIR, TRANSFORM_DIR):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)
    ref_path = manifest.resolve(manifest.reference_colors) if manifest.reference_colors else None
    standard = read_reference_colors(ref_path)

    plan = plan_pairs(manifest)
    grouped = {}
    for src, fg, ref, _ in plan:
        grouped.setdefault(src, {}).setdefault(fg, []).append(ref)
    needed = sorted(set(grouped) | {p[2] for p in plan})

    failures = []
    prepared = {}
    results = _map(_prepare_safe, [(manifest, manifest[i], standard, out_dir) for i in needed], workers)
    for image_id, prep, err in results:
        if prep is None:
            failures.append((image_id, err))
        else:
            prepared[image_id] = prep

    tasks = [(manifest, manifest[src], sorted(fgs.items()), prepared, out_dir)
             for src, fgs in grouped.items()]
    pairs = []
    for p, f in _map(_build_safe, tasks, workers):
        pairs.extend(p)
        failures.extend(f)

    summary = _summarize(manifest, plan, pairs, prepared, failures)
    (out_dir / "pairs.json").write_text(
        json.dumps([dataclasses.asdict(p) for p in pairs], indent=1) + "\n")
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for item, err in failures:
        log.warning("%s: %s", item, err)
    return pairs, summary


def _stats(values):
    if not values:
        return {"mean": None, "max": None}
    return {"mean": float(np.mean(values)), "max": float(np.max(values))}


def _summarize(manifest, plan, pairs, prepared, failures):
    fwd = {i: p.forward_residual for i, p in prepared.items()}
    inv = {i: p.inverse_residual for i, p in prepared.items()}
    limit = manifest.config.residual_warning
    return {
        "planned_pairs": len(plan),
        "pairs": len(pairs),
        "pairs_per_split": dict(sorted(Counter(p.split for p in pairs).items())),
        "forward_residual": _stats(list(fwd.values())),
        "inverse_residual": _stats(list(inv.values())),
        "high_residual_images": sorted(i for i in prepared if max(fwd[i], inv[i]) > limit),
        "failures": [{"item": i, "error": e} for i, e in failures],
        "seed": manifest.seed,
        "references_per_foreground": manifest.references_per_foreground,
        "config": dataclasses.asdict(manifest.config),
    }


def load_pairs(out_dir):
    data = json.loads((Path(out_dir) / "pairs.json").read_text())
    return [PairRecord(**d) for d in data]


# ---------------------------------------------------------------- validation

def validate_output(manifest: Manifest, out_dir):
    """Re-check the dataset invariants on a built output directory.

    Returns a list of human-readable violations; empty means valid.
    """
    out_dir = Path(out_dir)
    problems = []
    try:
        pairs = load_pairs(out_dir)
    except (OSError, ValueError, TypeError) as exc:
        return [f"pairs.json unreadable: {exc}"]

    expected = {(s, f, r) for s, f, r, _ in plan_pairs(manifest)}
    seen = Counter((p.source_id, p.fg_index, p.reference_id) for p in pairs)
    if len(pairs) != len(expected):
        problems.append(f"count law: {len(pairs)} pairs, expected {len(expected)}")
    for key, n in seen.items():
        if n > 1:
            problems.append(f"pair {key} listed {n} times")
        if key not in expected:
            problems.append(f"pair {key} not reproducible from manifest seed")

    crops = {}
    for p in pairs:
        pid = p.pair_id
        if p.source_id == p.reference_id:
            problems.append(f"{pid}: self-pair")
        try:
            src, ref = manifest[p.source_id], manifest[p.reference_id]
        except KeyError as exc:
            problems.append(f"{pid}: unknown image {exc}")
            continue
        if src.split != ref.split or p.split != src.split:
            problems.append(f"{pid}: split leakage ({src.split} source, {ref.split} reference)")
        paths = [out_dir / p.composite, out_dir / p.real_image, out_dir / p.mask]
        missing = [str(x) for x in paths if not x.exists()]
        if missing:
            problems.append(f"{pid}: missing files {missing}")
            continue
        comp, real = load_srgb8(paths[0]), load_srgb8(paths[1])
        mask = load_mask(paths[2]).pixels
        if p.source_id not in crops:
            raw = load_srgb8(manifest.resolve(src.path))
            crops[p.source_id] = crop_image(raw, image_crop(manifest, src, raw.shape[1], raw.shape[0]))
        if not np.array_equal(real, crops[p.source_id]):
            problems.append(f"{pid}: ground truth differs from cropped source")
        if comp.shape != real.shape or mask.shape != real.shape[:2]:
            problems.append(f"{pid}: composite/real/mask sizes differ")
            continue
        if not np.array_equal(comp[~mask], real[~mask]):
            problems.append(f"{pid}: background altered")
    return problems


# ---------------------------------------------------------------- metrics

def metrics_table(out_dir):
    """Per-pair (pair_id, mse, fmse, psnr) rows on 8-bit values, plus aggregate means."""
    out_dir = Path(out_dir)
    rows = []
    for p in load_pairs(out_dir):
        comp = load_srgb8(out_dir / p.composite)
        real = load_srgb8(out_dir / p.real_image)
        mask = load_mask(out_dir / p.mask)
        rows.append((p.pair_id, mse(comp, real), fmse(comp, real, mask), psnr(comp, real)))
    finite = [r[3] for r in rows if np.isfinite(r[3])]
    means = {
        "mse": float(np.mean([r[1] for r in rows])) if rows else None,
        "fmse": float(np.mean([r[2] for r in rows])) if rows else None,
        "psnr": float(np.mean(finite)) if finite else None,
        "identical": len(rows) - len(finite),
    }
    return rows, means
