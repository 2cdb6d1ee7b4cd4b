"""Template/search patch extraction around candidate boxes.

Every candidate box yields two square crops from the same image: a tight
object-centered template and a wider search region, both centered on the box
center. The crop side follows the Siamese-tracking context rule

    p   = context_amount * (w + h)
    s_z = sqrt((w + p) * (h + p))        # template side, image space
    s_x = s_z * search_size / template_size

and the region is resampled bilinearly in continuous coordinates, so
non-integer sides introduce no center drift. Samples falling outside the
image are filled with the per-channel image mean.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from swellkit.geometry import BBox, NightImage

TEMPLATE = "template"
SEARCH = "search"


@dataclass(frozen=True)
class CropConfig:
    template_size: int = 127
    search_size: int = 255
    context_amount: float = 0.5

    def __post_init__(self):
        if self.template_size < 16:
            raise ValueError(f"template_size must be >= 16, got {self.template_size}")
        if self.search_size <= self.template_size:
            raise ValueError(
                f"search_size must exceed template_size, got {self.search_size} <= {self.template_size}"
            )
        if not 0.0 <= self.context_amount <= 1.0:
            raise ValueError(f"context_amount must be in [0, 1], got {self.context_amount}")


@dataclass(frozen=True, eq=False)
class Patch:
    """Square crop resampled to a fixed size."""

    size: int
    pixels: np.ndarray
    source_box: BBox
    kind: str
    image_id: str = ""

    def __post_init__(self):
        px = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.uint8))
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        if px.shape != (self.size, self.size, 3):
            raise ValueError(f"patch pixels must be ({self.size}, {self.size}, 3), got {px.shape}")
        if self.kind not in (TEMPLATE, SEARCH):
            raise ValueError(f"patch kind must be '{TEMPLATE}' or '{SEARCH}', got {self.kind!r}")

    def __eq__(self, other) -> bool:
        if not isinstance(other, Patch):
            return NotImplemented
        return (
            self.size == other.size
            and self.kind == other.kind
            and self.source_box == other.source_box
            and self.image_id == other.image_id
            and bool(np.array_equal(self.pixels, other.pixels))
        )


@dataclass(frozen=True)
class TrainingSample:
    """Paired template/search crops around one candidate box."""

    template: Patch
    search: Patch
    box: BBox
    image_id: str

    def __post_init__(self):
        if self.template.kind != TEMPLATE:
            raise ValueError("TrainingSample.template must be a template patch")
        if self.search.kind != SEARCH:
            raise ValueError("TrainingSample.search must be a search patch")
        if self.template.image_id != self.image_id or self.search.image_id != self.image_id:
            raise ValueError("patch image_id differs from sample image_id")


def context_sides(box: BBox, cfg: CropConfig) -> tuple[float, float]:
    """Image-space crop sides (template, search) for a box under the context rule."""
    p = cfg.context_amount * (box.w + box.h)
    s_z = math.sqrt((box.w + p) * (box.h + p))
    s_x = s_z * (cfg.search_size / cfg.template_size)
    return s_z, s_x


def mean_fill_value(img: NightImage) -> np.ndarray:
    """Per-channel mean of the image, rounded to the nearest uint8."""
    mean = img.pixels.reshape(-1, 3).mean(axis=0, dtype=np.float64)
    return np.rint(mean).astype(np.uint8)


def _resample_square(img: NightImage, cx: float, cy: float, side: float, out_size: int,
                     fill: np.ndarray) -> np.ndarray:
    """Bilinearly sample a square region [c - side/2, c + side/2] to out_size**2."""
    h, w = img.pixels.shape[:2]
    offsets = (np.arange(out_size, dtype=np.float64) + 0.5) * (side / out_size)
    xs = cx - side / 2.0 + offsets
    ys = cy - side / 2.0 + offsets

    # pixel centers sit at integer + 0.5; clamping replicates the border
    fx = np.clip(xs - 0.5, 0.0, float(w - 1))
    fy = np.clip(ys - 0.5, 0.0, float(h - 1))
    x0 = np.floor(fx).astype(np.intp)
    y0 = np.floor(fy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = (fx - x0)[np.newaxis, :, np.newaxis]
    wy = (fy - y0)[:, np.newaxis, np.newaxis]

    px = img.pixels.astype(np.float64)
    top = (1.0 - wx) * px[y0][:, x0] + wx * px[y0][:, x1]
    bottom = (1.0 - wx) * px[y1][:, x0] + wx * px[y1][:, x1]
    values = (1.0 - wy) * top + wy * bottom
    out = np.rint(values)
    np.clip(out, 0, 255, out=out)
    out = out.astype(np.uint8)

    outside = ~((xs >= 0.0) & (xs <= w))[np.newaxis, :] | ~((ys >= 0.0) & (ys <= h))[:, np.newaxis]
    if outside.any():
        out[outside] = fill
    return out


def crop_patch(img: NightImage, box: BBox, cfg: CropConfig, kind: str, image_id: str = "") -> Patch:
    """Crop one context patch of the given kind around the box center."""
    if box.w <= 0 or box.h <= 0:
        raise ValueError(f"cannot crop a degenerate box (w={box.w}, h={box.h})")
    if kind not in (TEMPLATE, SEARCH):
        raise ValueError(f"unknown patch kind {kind!r}")
    s_z, s_x = context_sides(box, cfg)
    side, out_size = (s_z, cfg.template_size) if kind == TEMPLATE else (s_x, cfg.search_size)
    cx, cy = box.center
    pixels = _resample_square(img, cx, cy, side, out_size, mean_fill_value(img))
    return Patch(size=out_size, pixels=pixels, source_box=box, kind=kind, image_id=image_id)


def make_sample(img: NightImage, box: BBox, cfg: CropConfig, image_id: str = "") -> TrainingSample:
    """Build the paired template/search sample for one candidate box."""
    template = crop_patch(img, box, cfg, TEMPLATE, image_id)
    search = crop_patch(img, box, cfg, SEARCH, image_id)
    return TrainingSample(template=template, search=search, box=box, image_id=image_id)
