"""Boxes, binary masks, the RLE codec, and the elementary overlap/distance metrics.

Conventions used throughout the toolkit:

* Boxes are continuous ``(x, y, w, h)`` with a top-left origin. A box derived
  from pixel extents uses inclusive bounds, i.e. ``w = max_col - min_col + 1``.
* Masks are row-major ``(height, width)`` boolean grids.
* RLE uses column-major (Fortran) scan order with runs alternating
  background/foreground starting at background, the COCO uncompressed
  convention. A leading zero run marks a scan that starts on foreground.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class RleFormatError(ValueError):
    """Structurally invalid run-length data (bad sum, interior zero runs)."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box: top-left corner plus size, in pixels."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("x", "y", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"BBox.{name} must be finite, got {v!r}")
        if self.w < 0 or self.h < 0:
            raise ValueError(f"BBox size must be non-negative, got w={self.w}, h={self.h}")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def center(self) -> tuple[float, float]:
        return (self.x + self.w / 2.0, self.y + self.h / 2.0)

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.w, self.h]


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean pixel grid, immutable after construction."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        bits = np.ascontiguousarray(bits)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        if bits.ndim != 2:
            raise ValueError(f"mask bits must be 2-D (height, width), got shape {bits.shape}")

    @property
    def height(self) -> int:
        return int(self.bits.shape[0])

    @property
    def width(self) -> int:
        return int(self.bits.shape[1])

    @property
    def area(self) -> int:
        """Number of foreground pixels."""
        return int(self.bits.sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    @classmethod
    def zeros(cls, width: int, height: int) -> "BinaryMask":
        return cls(np.zeros((height, width), dtype=bool))


@dataclass(frozen=True)
class RleMask:
    """Run-length encoded mask in column-major scan order."""

    width: int
    height: int
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        if self.width < 0 or self.height < 0:
            raise ValueError(f"RleMask dimensions must be non-negative, got {self.width}x{self.height}")
        if any(c < 0 for c in self.counts):
            raise ValueError("RleMask counts must be non-negative")


@dataclass(frozen=True, eq=False)
class NightImage:
    """Raw RGB image, H x W x 3 uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.uint8))
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"image pixels must be (H, W, 3), got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    def __eq__(self, other) -> bool:
        if not isinstance(other, NightImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(np.array_equal(self.pixels, other.pixels))


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes; 0.0 when the union has zero area."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def cle(a: BBox, b: BBox) -> float:
    """Center location error: Euclidean distance between box centers, in pixels."""
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


def mask_to_bbox(m: BinaryMask) -> BBox | None:
    """Tight box around the foreground, or None for an empty mask."""
    rows = np.flatnonzero(m.bits.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(m.bits.any(axis=0))
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return BBox(float(x0), float(y0), float(x1 - x0 + 1), float(y1 - y0 + 1))


def rle_encode(m: BinaryMask) -> RleMask:
    """Encode a mask into canonical column-major RLE (background run first)."""
    flat = m.bits.ravel(order="F")
    n = flat.size
    if n == 0:
        return RleMask(m.width, m.height, ())
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [n]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return RleMask(m.width, m.height, tuple(counts))


def rle_decode(r: RleMask) -> BinaryMask:
    """Decode column-major RLE back into a mask.

    Raises RleFormatError when the run sum does not cover width*height or an
    interior zero run is present.
    """
    total = sum(r.counts)
    expected = r.width * r.height
    if total != expected:
        raise RleFormatError(
            f"run sum {total} does not match {r.width}x{r.height} = {expected} pixels"
        )
    if any(c == 0 for c in r.counts[1:]):
        raise RleFormatError("interior zero run (only a leading zero is permitted)")
    values = np.arange(len(r.counts), dtype=np.int64) % 2 == 1
    flat = np.repeat(values, np.asarray(r.counts, dtype=np.int64))
    bits = flat.reshape((r.height, r.width), order="F")
    return BinaryMask(bits)
