"""Ambient-intensity statistics over generated samples.

Ambient intensity (AI) is the mean Rec.601 luma of a patch. It is measured
on the search patch because the search region reflects the surroundings of
the object rather than the object itself. Patches with AI strictly below
the low-ambient-intensity threshold (20 by default) carry the LAI tag.

Luma is computed as (299 R + 587 G + 114 B) / 1000 so constant patches get
an exactly representable AI.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from swellkit.crops import Patch

LAI_THRESHOLD = 20.0
NUM_BINS = 256


def milli_luma(pixels: np.ndarray) -> np.ndarray:
    """Integer luma * 1000 per pixel (exact, no float rounding)."""
    px = pixels.astype(np.int64)
    return 299 * px[..., 0] + 587 * px[..., 1] + 114 * px[..., 2]


def ambient_intensity(patch: Patch) -> float:
    """Mean luma of the patch, in [0, 255]."""
    lu = milli_luma(patch.pixels)
    return int(lu.sum()) / (1000 * lu.size)


def is_lai(ai: float, threshold: float = LAI_THRESHOLD) -> bool:
    """Low ambient intensity: AI strictly below the threshold."""
    return ai < threshold


@dataclass
class AiHistogram:
    bin_width: float = 1.0
    counts: list[int] = field(default_factory=lambda: [0] * NUM_BINS)
    total: int = 0
    lai_count: int = 0
    lai_threshold: float = LAI_THRESHOLD

    @property
    def lai_fraction(self) -> float:
        return self.lai_count / self.total if self.total else 0.0

    def add(self, ai: float) -> None:
        if not 0.0 <= ai <= 255.0:
            raise ValueError(f"AI value {ai} outside [0, 255]")
        idx = min(int(ai // self.bin_width), len(self.counts) - 1)
        self.counts[idx] += 1
        self.total += 1
        if is_lai(ai, self.lai_threshold):
            self.lai_count += 1

    def merge(self, other: "AiHistogram") -> "AiHistogram":
        if other.bin_width != self.bin_width or other.lai_threshold != self.lai_threshold:
            raise ValueError("cannot merge histograms with different binning")
        merged = AiHistogram(self.bin_width,
                             [a + b for a, b in zip(self.counts, other.counts)],
                             self.total + other.total,
                             self.lai_count + other.lai_count,
                             self.lai_threshold)
        return merged


def build_histogram(values: Iterable[float], lai_threshold: float = LAI_THRESHOLD) -> AiHistogram:
    hist = AiHistogram(lai_threshold=lai_threshold)
    for i, ai in enumerate(values):
        try:
            hist.add(float(ai))
        except ValueError as e:
            raise ValueError(f"value {i}: {e}") from e
    return hist


def histogram_from_index(path: str | Path, lai_threshold: float = LAI_THRESHOLD) -> AiHistogram:
    """Histogram the 'ai' field of a sample-store index (JSONL)."""
    hist = AiHistogram(lai_threshold=lai_threshold)
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path.name} line {lineno}"
            try:
                obj = json.loads(line)
                ai = float(obj["ai"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ValueError(f"{where}: {e}") from e
            try:
                hist.add(ai)
            except ValueError as e:
                raise ValueError(f"{where}: {e}") from e
    return hist


def write_histogram_csv(hist: AiHistogram, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("bin,count\n")
        for i, c in enumerate(hist.counts):
            fh.write(f"{i},{c}\n")


def summary_dict(hist: AiHistogram) -> dict:
    return {"total": hist.total, "lai_count": hist.lai_count, "lai_fraction": hist.lai_fraction}


def write_summary_json(hist: AiHistogram, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(summary_dict(hist), separators=(",", ":")) + "\n")
