#!/usr/bin/env python3
"""End-to-end pipeline walkthrough on a synthetic nighttime corpus.

Builds a small corpus of dark scenes with bright objects, then runs
segment -> swell -> stats through the CLI entry points and prints the
resulting reports. Everything lands under --workdir (default ./demo_run).
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from swellkit.cli import main as swellkit_main


def build_corpus(images_dir: Path, n_images: int, seed: int) -> None:
    rng = np.random.default_rng(seed)
    images_dir.mkdir(parents=True, exist_ok=True)
    for i in range(n_images):
        px = np.zeros((128, 192, 3), dtype=np.uint8)
        px[:, :] = (rng.integers(4, 14), rng.integers(4, 14), rng.integers(6, 16))
        for k in range(3):
            w, h = rng.integers(12, 26, size=2)
            x = k * 64 + int(rng.integers(2, 64 - w - 2))
            y = int(rng.integers(2, 128 - h - 2))
            brightness = int(rng.integers(60, 240))
            px[y:y + h, x:x + w] = (brightness, brightness, min(255, brightness + 10))
        Image.fromarray(px).save(images_dir / f"scene{i:03d}.png")


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workdir", default="demo_run")
    ap.add_argument("--images", type=int, default=25)
    ap.add_argument("--ratio", type=float, default=1.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    work = Path(args.workdir)
    images = work / "images"
    build_corpus(images, args.images, args.seed)
    print(f"built {args.images} synthetic scenes under {images}")

    manifest = work / "manifest.jsonl"
    code = swellkit_main(["segment", "--images", str(images), "--out", str(manifest),
                          "--luma-threshold", "40", "--min-area", "16"])
    if code != 0:
        return code
    print(f"wrote {manifest}")

    store = work / "store"
    code = swellkit_main(["swell", "--manifest", str(manifest), "--images", str(images),
                          "--out", str(store), "--ratio", str(args.ratio),
                          "--seed", str(args.seed), "--min-area", "64"])
    if code != 0:
        return code

    code = swellkit_main(["stats", "--index", str(store / "index.jsonl"),
                          "--csv", str(work / "ai_histogram.csv"),
                          "--json", str(work / "ai_summary.json")])
    if code != 0:
        return code

    summary = json.loads((work / "ai_summary.json").read_text())
    print(f"sample store: {store}")
    print(f"AI histogram: {work / 'ai_histogram.csv'} "
          f"(total={summary['total']}, lai_fraction={summary['lai_fraction']:.3f})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
