"""Batch command line: ``illumtransfer <command> --manifest m.json [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .color import read_reference_colors, srgb_to_linear
from .errors import IllumTransferError
from .fitting import fit_pair, fit_residual, transform_fingerprint, write_transform
from .manifest import load_manifest, save_manifest
from .patches import sample_patch_colors


def _common():
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--manifest", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--refs-per-fg", type=int, dest="refs_per_fg")
    p.add_argument("--ridge", type=float)
    p.add_argument("--degree", type=int, choices=(1, 2))
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", type=Path, default=Path("out"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _manifest(args):
    if args.manifest is None:
        raise SystemExit(f"{args.command}: --manifest is required")
    m = load_manifest(args.manifest)
    return m.with_overrides(seed=args.seed, references_per_foreground=args.refs_per_fg,
                            ridge=args.ridge, degree=args.degree)


def _standard(m):
    return read_reference_colors(m.resolve(m.reference_colors) if m.reference_colors else None)


def cmd_extract_patches(args):
    m = _manifest(args)
    out = open(args.output, "w") if args.output else sys.stdout
    status = 0
    try:
        out.write("# image_id patch r g b  (linear RGB)\n")
        for rec in m.active():
            try:
                img = srgb_to_linear(pipeline.load_srgb8(m.resolve(rec.path)))
                if rec.annotation is None:
                    raise IllumTransferError(f"{rec.image_id}: no checker annotation")
                patches = sample_patch_colors(img, rec.annotation)
            except IllumTransferError as exc:
                logging.error("%s", exc)
                status = 1
                continue
            for i, (r, g, b) in enumerate(patches.colors, 1):
                out.write(f"{rec.image_id} {i} {r:.8f} {g:.8f} {b:.8f}\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return status


def cmd_fit(args):
    m = _manifest(args)
    cfg = m.config
    standard = _standard(m)
    tdir = args.out_dir / pipeline.TRANSFORM_DIR
    tdir.mkdir(parents=True, exist_ok=True)
    status = 0
    print("image_id\tforward_rmse\tinverse_rmse\tforward_fp\tinverse_fp")
    for rec in m.active():
        try:
            img = srgb_to_linear(pipeline.load_srgb8(m.resolve(rec.path)))
            if rec.annotation is None:
                raise IllumTransferError(f"{rec.image_id}: no checker annotation")
            patches = sample_patch_colors(img, rec.annotation)
            fwd, inv = fit_pair(standard, patches, cfg.feature_spec, cfg.ridge)
        except IllumTransferError as exc:
            logging.error("%s", exc)
            status = 1
            continue
        key = pipeline._patch_fingerprint(patches)
        write_transform(tdir / f"{rec.image_id}.forward.txt", fwd, rec.image_id, "forward", cfg.ridge, key)
        write_transform(tdir / f"{rec.image_id}.inverse.txt", inv, rec.image_id, "inverse", cfg.ridge, key)
        rf, ri = fit_residual(fwd, patches, standard), fit_residual(inv, standard, patches)
        flag = "  HIGH" if max(rf, ri) > cfg.residual_warning else ""
        print(f"{rec.image_id}\t{rf:.6f}\t{ri:.6f}\t"
              f"{transform_fingerprint(fwd)}\t{transform_fingerprint(inv)}{flag}")
    return status


def cmd_scan_duplicates(args):
    m = _manifest(args)
    pairs = pipeline.near_duplicate_scan(m, args.threshold)
    for a, b, d in pairs:
        print(f"{a}\t{b}\t{d}\t-> {b} flagged duplicate")
    if not pairs:
        print("no near-duplicates found")
    if args.update:
        save_manifest(pipeline.flag_duplicates(load_manifest(args.manifest), pairs), args.manifest)
    return 0


def cmd_crop(args):
    m = _manifest(args)
    flagged, boxes = pipeline.crop_scan(m)
    for image_id, box in boxes.items():
        print(f"{image_id}\t" + ("checker_central" if box is None else " ".join(map(str, box))))
    if args.update:
        base = load_manifest(args.manifest)
        for rec in flagged.records:
            if rec.exclusion != base[rec.image_id].exclusion:
                base = base.replace_record(rec)
        save_manifest(base, args.manifest)
    return 0


def cmd_build(args):
    m = _manifest(args)
    if args.dry_run:
        print(json.dumps(pipeline.dry_run(m), indent=2))
        return 0
    _, summary = pipeline.build_dataset(m, args.out_dir, args.jobs)
    print(json.dumps({k: summary[k] for k in ("planned_pairs", "pairs", "pairs_per_split",
                                              "high_residual_images")}, indent=2))
    for f in summary["failures"]:
        print(f"FAILED {f['item']}: {f['error']}", file=sys.stderr)
    return 1 if summary["failures"] else 0


def cmd_validate(args):
    problems = pipeline.validate_output(_manifest(args), args.out_dir)
    for p in problems:
        print(p)
    print("valid" if not problems else f"{len(problems)} problem(s)")
    return 1 if problems else 0


def cmd_metrics(args):
    rows, means = pipeline.metrics_table(args.out_dir)
    lines = ["pair_id\tmse\tfmse\tpsnr"]
    lines += [f"{pid}\t{a:.4f}\t{b:.4f}\t{c:.4f}" for pid, a, b, c in rows]
    fmt = lambda v: "nan" if v is None else f"{v:.4f}"
    lines.append(f"MEAN\t{fmt(means['mse'])}\t{fmt(means['fmse'])}\t{fmt(means['psnr'])}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="illumtransfer", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    p = sub.add_parser("extract-patches", parents=[common], help="print the 24 patch colors per image")
    p.add_argument("--output")
    p.set_defaults(func=cmd_extract_patches)

    p = sub.add_parser("fit", parents=[common], help="fit and cache forward/inverse transforms")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("scan-duplicates", parents=[common], help="report near-duplicate images")
    p.add_argument("--threshold", type=int)
    p.add_argument("--update", action="store_true", help="write duplicate flags into the manifest")
    p.set_defaults(func=cmd_scan_duplicates)

    p = sub.add_parser("crop", parents=[common], help="compute checker-free crops")
    p.add_argument("--update", action="store_true", help="write checker_central flags into the manifest")
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("build", parents=[common], help="generate composite/real pairs")
    p.add_argument("--dry-run", action="store_true", help="only count the pairs")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("validate", parents=[common], help="check invariants of a built dataset")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("metrics", parents=[common], help="MSE/fMSE/PSNR per pair")
    p.add_argument("--output")
    p.set_defaults(func=cmd_metrics)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except IllumTransferError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
