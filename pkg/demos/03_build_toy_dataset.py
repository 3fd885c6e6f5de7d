"""Build a small harmonization dataset from a manifest, end to end.

Writes five synthetic photos with checkers and two foreground masks each into
a temporary directory, then runs duplicate screening, cropping, the pair
build, validation and metrics.  The CLI equivalents are::

    illumtransfer scan-duplicates --manifest m.json
    illumtransfer crop --manifest m.json
    illumtransfer build --manifest m.json --out-dir out
    illumtransfer validate --manifest m.json --out-dir out
    illumtransfer metrics --out-dir out

    python demos/03_build_toy_dataset.py
"""
import json
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from illumtransfer import build_dataset, linear_to_srgb, load_manifest, near_duplicate_scan, read_reference_colors, validate_output
from illumtransfer.pipeline import crop_scan, dry_run, metrics_table

root = Path(tempfile.mkdtemp(prefix="illumtransfer-demo-"))
(root / "img").mkdir()
(root / "masks").mkdir()
rng = np.random.default_rng(7)
standard = read_reference_colors()
w, h, cell = 200, 150, 12
ox, oy = w - 6 * cell - 4, h - 4 * cell - 4

images = []
for i in range(5):
    tiles = rng.uniform(0.05, 0.9, size=(h // 25 + 1, w // 25 + 1, 3))
    refl = np.kron(tiles, np.ones((25, 25, 1)))[:h, :w]
    illum = rng.uniform(0.55, 1.0, 3)
    lin = refl * illum
    for k in range(24):
        r, c = divmod(k, 6)
        lin[oy + r * cell:oy + (r + 1) * cell, ox + c * cell:ox + (c + 1) * cell] = standard.colors[k] * illum
    Image.fromarray(linear_to_srgb(lin)).save(root / "img" / f"s{i}.png")
    masks = []
    for f in range(2):
        m = np.zeros((h, w), np.uint8)
        m[15 + 30 * f:45 + 30 * f, 20 + 60 * f:70 + 60 * f] = 255
        Image.fromarray(m, mode="L").save(root / "masks" / f"s{i}_{f}.png")
        masks.append(f"masks/s{i}_{f}.png")
    images.append({"image_id": f"s{i}", "path": f"img/s{i}.png", "split": "train", "masks": masks,
                   "checker": [ox, oy, ox + 6 * cell, oy, ox + 6 * cell, oy + 4 * cell, ox, oy + 4 * cell]})

(root / "manifest.json").write_text(json.dumps(
    {"seed": 3, "references_per_foreground": 3, "images": images}, indent=2))
manifest = load_manifest(root / "manifest.json")

print("near-duplicates:", near_duplicate_scan(manifest) or "none")
manifest, boxes = crop_scan(manifest)
print("checker-free crop of s0:", boxes["s0"])
print("dry run:", dry_run(manifest))

pairs, summary = build_dataset(manifest, root / "out")
print(f"built {summary['pairs']} pairs, failures: {summary['failures']}")
print("first pair:", pairs[0].composite, "<->", pairs[0].real_image)
print("validation problems:", validate_output(manifest, root / "out") or "none")

rows, means = metrics_table(root / "out")
print(f"mean MSE {means['mse']:.2f}, fMSE {means['fmse']:.2f}, PSNR {means['psnr']:.2f} dB")
print("output in", root / "out")
