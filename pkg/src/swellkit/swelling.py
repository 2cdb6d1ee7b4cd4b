"""One-to-many training-sample generation over a manifest of masked images.

Each raw image contributes one sample per surviving mask: entries below the
area floor are rejected, the rest are ordered largest-first and capped at
max_samples_per_image. A ratio below 1 subsamples the image list with a
seeded shuffle before any work happens, so reruns with the same seed select
the same images.

Sample store layout (filesystem-browsable, resumable):

    out/<image_id>/<k>.template.png
    out/<image_id>/<k>.search.png
    out/index.jsonl        one line per sample: {image_id, k, bbox, ai}

Per-image failures (missing file, undecodable image, dimension mismatch)
are recorded in the report and never abort the run.
"""

from __future__ import annotations

import json
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from PIL import Image
import numpy as np

from swellkit.crops import CropConfig, TrainingSample, make_sample
from swellkit.geometry import NightImage
from swellkit.masks import ManifestRecord, MaskEntry, MaskSet, load_manifest, load_night_image
from swellkit.stats import ambient_intensity


@dataclass(frozen=True)
class SwellConfig:
    crop: CropConfig = CropConfig()
    min_area: int = 64
    max_samples_per_image: int = 64
    ratio: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")
        if self.min_area < 1:
            raise ValueError(f"min_area must be >= 1, got {self.min_area}")
        if self.max_samples_per_image < 1:
            raise ValueError(f"max_samples_per_image must be >= 1, got {self.max_samples_per_image}")


@dataclass
class SwellReport:
    images_in: int = 0
    images_used: int = 0
    samples_out: int = 0
    swelling_ratio: float = 0.0
    rejected_small: int = 0
    truncated: int = 0
    zero_sample_images: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)

    def finalize(self) -> "SwellReport":
        self.swelling_ratio = self.samples_out / self.images_used if self.images_used else 0.0
        return self

    def to_dict(self) -> dict:
        return {
            "images_in": self.images_in,
            "images_used": self.images_used,
            "samples_out": self.samples_out,
            "swelling_ratio": self.swelling_ratio,
            "rejected_small": self.rejected_small,
            "truncated": self.truncated,
            "zero_sample_images": self.zero_sample_images,
            "errors": [[image_id, msg] for image_id, msg in self.errors],
        }


def subsample(image_ids: Sequence[str], ratio: float, seed: int) -> list[str]:
    """Seeded shuffle, then take the first round(ratio * N) ids."""
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"ratio must be in (0, 1], got {ratio}")
    ids = list(image_ids)
    if ratio == 1.0:
        return ids
    k = int(len(ids) * ratio + 0.5)
    rng = random.Random(seed)
    rng.shuffle(ids)
    return ids[:k]


def _select_entries(masks: MaskSet, cfg: SwellConfig) -> tuple[list[MaskEntry], int, int]:
    """Area filter, largest-first order, per-image cap. Returns (kept, rejected, truncated)."""
    surviving = [e for e in masks.entries if e.area >= cfg.min_area]
    rejected = len(masks.entries) - len(surviving)
    surviving.sort(key=lambda e: -e.area)
    truncated = max(0, len(surviving) - cfg.max_samples_per_image)
    return surviving[: cfg.max_samples_per_image], rejected, truncated


def swell_image(img: NightImage, masks: MaskSet, cfg: SwellConfig) -> list[TrainingSample]:
    """All training samples one image yields under the config."""
    if masks.width != img.width or masks.height != img.height:
        raise ValueError(
            f"mask set is {masks.width}x{masks.height} but image is {img.width}x{img.height}"
        )
    selected, _, _ = _select_entries(masks, cfg)
    return [make_sample(img, e.bbox, cfg.crop, masks.image_id) for e in selected]


def _save_png(pixels: np.ndarray, path: Path) -> None:
    Image.fromarray(np.asarray(pixels)).save(path, format="PNG")


def index_line(image_id: str, k: int, sample: TrainingSample, ai: float) -> str:
    return json.dumps(
        {"image_id": image_id, "k": k, "bbox": sample.box.as_list(), "ai": ai},
        separators=(",", ":"),
    )


def _process_record(rec: ManifestRecord, images_root: Path, cfg: SwellConfig):
    """Worker: load, swell, measure. Returns (rec, samples, ai values) or (rec, error message)."""
    try:
        img = load_night_image(images_root / rec.image)
    except (OSError, ValueError) as e:
        return rec, None, f"unreadable image: {e}"
    if img.width != rec.mask_set.width or img.height != rec.mask_set.height:
        return rec, None, (
            f"image is {img.width}x{img.height} but manifest says "
            f"{rec.mask_set.width}x{rec.mask_set.height}"
        )
    samples = swell_image(img, rec.mask_set, cfg)
    ais = [ambient_intensity(s.search) for s in samples]
    return rec, list(zip(samples, ais)), None


def swell_dataset(manifest: str | Path, images_root: str | Path, cfg: SwellConfig,
                  out_dir: str | Path, jobs: int = 1) -> SwellReport:
    """Run the full swelling pipeline and write the sample store.

    Two passes over the manifest: the first collects image ids for
    subsampling, the second processes the selected images. Workers run in
    parallel but results are written in manifest order, so the store and
    report are byte-identical regardless of the worker count.
    """
    manifest = Path(manifest)
    images_root = Path(images_root)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    report = SwellReport()
    all_ids = [rec.mask_set.image_id for rec in load_manifest(manifest)]
    report.images_in = len(all_ids)
    selected = set(subsample(all_ids, cfg.ratio, cfg.seed))

    def selected_records():
        for rec in load_manifest(manifest):
            if rec.mask_set.image_id in selected:
                yield rec

    index_path = out_dir / "index.jsonl"
    with index_path.open("w", encoding="utf-8", newline="\n") as index_fh:
        with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
            for rec, results, error in pool.map(
                lambda r: _process_record(r, images_root, cfg), selected_records()
            ):
                image_id = rec.mask_set.image_id
                if error is not None:
                    report.errors.append((image_id, error))
                    continue
                report.images_used += 1
                _, rejected, truncated = _select_entries(rec.mask_set, cfg)
                report.rejected_small += rejected
                report.truncated += truncated
                if not results:
                    report.zero_sample_images += 1
                    continue
                sample_dir = out_dir / image_id
                sample_dir.mkdir(parents=True, exist_ok=True)
                for k, (sample, ai) in enumerate(results):
                    _save_png(sample.template.pixels, sample_dir / f"{k}.template.png")
                    _save_png(sample.search.pixels, sample_dir / f"{k}.search.png")
                    index_fh.write(index_line(image_id, k, sample, ai) + "\n")
                    report.samples_out += 1
    return report.finalize()
