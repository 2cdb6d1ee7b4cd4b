"""Uniform sources of per-image mask sets.

Three providers share one validated output type: JSONL manifest ingestion,
a deterministic luma-threshold segmenter for desk-scale work, and an HTTP
client for an external segmentation service. Validation is strict
everywhere: a mask set whose stored bbox or area disagrees with its RLE is
rejected, never repaired, because silently repaired annotations would skew
every downstream statistic.

Manifest format (JSON Lines, one image per line):

    {"image": str, "image_id": str, "width": int, "height": int,
     "masks": [{"counts": [int...], "bbox": [x, y, w, h],
                "area": int, "score": float}]}

Wire protocol: POST {endpoint}/v1/segment with {"image_id": str,
"png_base64": str}; the 200 response carries the same mask-set shape
(without "image", optionally with a "metadata" block).
GET {endpoint}/v1/health reports {"status": "ok"} once the model is loaded.
"""

from __future__ import annotations

import base64
import io
import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
import requests
from PIL import Image
from scipy import ndimage

from swellkit.geometry import BBox, BinaryMask, NightImage, RleFormatError, RleMask, mask_to_bbox, rle_decode, rle_encode
from swellkit.stats import milli_luma

ENDPOINT_ENV = "SWELLKIT_SAM_ENDPOINT"


class ManifestError(ValueError):
    """Malformed manifest line (bad JSON, missing or mistyped fields)."""


class MaskValidationError(ValueError):
    """Mask set violating its invariants (bbox/area/RLE inconsistency)."""


class TransportError(RuntimeError):
    """Segmentation service unreachable after the configured retries."""


class ProtocolError(RuntimeError):
    """Segmentation service answered outside the wire contract."""


@dataclass(frozen=True)
class MaskEntry:
    mask: RleMask
    bbox: BBox
    area: int
    score: float


@dataclass(frozen=True)
class MaskSet:
    image_id: str
    width: int
    height: int
    entries: tuple[MaskEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class ManifestRecord:
    image: str
    mask_set: MaskSet

    def __post_init__(self):
        if not self.image:
            raise ValueError("manifest record image path must be non-empty")


def validate_mask_set(ms: MaskSet) -> None:
    """Check every entry against the decoded RLE; raise MaskValidationError on any mismatch."""
    for i, entry in enumerate(ms.entries):
        if entry.mask.width != ms.width or entry.mask.height != ms.height:
            raise MaskValidationError(
                f"mask {i}: RLE dimensions {entry.mask.width}x{entry.mask.height} "
                f"differ from image {ms.width}x{ms.height}"
            )
        try:
            decoded = rle_decode(entry.mask)
        except RleFormatError as e:
            raise MaskValidationError(f"mask {i}: {e}") from e
        if decoded.area != entry.area:
            raise MaskValidationError(
                f"mask {i}: stored area {entry.area} differs from decoded bit count {decoded.area}"
            )
        tight = mask_to_bbox(decoded)
        if tight is None:
            raise MaskValidationError(f"mask {i}: empty mask")
        if tight != entry.bbox:
            raise MaskValidationError(
                f"mask {i}: stored bbox {entry.bbox.as_list()} differs from tight bbox {tight.as_list()}"
            )
        if not 0.0 <= entry.score <= 1.0:
            raise MaskValidationError(f"mask {i}: score {entry.score} outside [0, 1]")


# --- JSON (de)serialization, canonical key order ---

def mask_set_to_dict(ms: MaskSet) -> dict:
    return {
        "image_id": ms.image_id,
        "width": ms.width,
        "height": ms.height,
        "masks": [
            {
                "counts": list(e.mask.counts),
                "bbox": e.bbox.as_list(),
                "area": e.area,
                "score": e.score,
            }
            for e in ms.entries
        ],
    }


def record_to_line(rec: ManifestRecord) -> str:
    body = {"image": rec.image}
    body.update(mask_set_to_dict(rec.mask_set))
    return json.dumps(body, separators=(",", ":"))


def _mask_set_from_dict(obj: dict, *, where: str) -> MaskSet:
    try:
        image_id = obj["image_id"]
        width = obj["width"]
        height = obj["height"]
        raw_masks = obj["masks"]
        if not isinstance(image_id, str) or not isinstance(width, int) or not isinstance(height, int):
            raise TypeError("image_id/width/height have wrong types")
        entries = []
        for m in raw_masks:
            counts = tuple(int(c) for c in m["counts"])
            bx, by, bw, bh = (float(v) for v in m["bbox"])
            entries.append(
                MaskEntry(
                    mask=RleMask(width, height, counts),
                    bbox=BBox(bx, by, bw, bh),
                    area=int(m["area"]),
                    score=float(m["score"]),
                )
            )
    except (KeyError, TypeError, ValueError, IndexError) as e:
        raise ManifestError(f"{where}: {e}") from e
    return MaskSet(image_id=image_id, width=width, height=height, entries=tuple(entries))


def load_manifest(path: str | Path) -> Iterator[ManifestRecord]:
    """Stream manifest records in file order, validating each mask set strictly."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            where = f"{path.name} line {lineno}"
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestError(f"{where}: invalid JSON ({e.msg})") from e
            if not isinstance(obj, dict):
                raise ManifestError(f"{where}: expected a JSON object")
            image = obj.get("image")
            if not isinstance(image, str) or not image:
                raise ManifestError(f"{where}: missing or empty 'image' path")
            ms = _mask_set_from_dict(obj, where=where)
            try:
                validate_mask_set(ms)
            except MaskValidationError as e:
                raise MaskValidationError(f"{where}: {e}") from e
            yield ManifestRecord(image=image, mask_set=ms)


def write_manifest(records: Iterable[ManifestRecord], path: str | Path) -> None:
    """Serialize records one per line with canonical key order."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(record_to_line(rec) + "\n")


# --- providers ---

def synthetic_segment(img: NightImage, luma_threshold: int = 40, min_area: int = 64,
                      image_id: str = "") -> MaskSet:
    """Deterministic stand-in segmenter: luma threshold + 4-connected components.

    Components with fewer than min_area pixels are dropped; entries are
    ordered by the (row, col) of their bounding-box top-left corner.
    """
    fg = milli_luma(img.pixels) > 1000 * int(luma_threshold)
    # default scipy structure is the 4-connected cross
    labels, n = ndimage.label(fg)
    entries = []
    order = []
    slices = ndimage.find_objects(labels)
    for label_id in range(1, n + 1):
        sl = slices[label_id - 1]
        if sl is None:
            continue
        component = labels[sl] == label_id
        area = int(component.sum())
        if area < min_area:
            continue
        bits = np.zeros((img.height, img.width), dtype=bool)
        bits[sl] = component
        mask = BinaryMask(bits)
        bbox = mask_to_bbox(mask)
        entries.append(MaskEntry(mask=rle_encode(mask), bbox=bbox, area=area, score=1.0))
        order.append((sl[0].start, sl[1].start, label_id))
    ordered = [e for _, e in sorted(zip(order, entries), key=lambda t: t[0])]
    return MaskSet(image_id=image_id, width=img.width, height=img.height, entries=tuple(ordered))


def load_night_image(path: str | Path) -> NightImage:
    with Image.open(path) as im:
        rgb = im.convert("RGB")
        return NightImage(np.asarray(rgb))


def png_base64(img: NightImage) -> str:
    buf = io.BytesIO()
    Image.fromarray(np.asarray(img.pixels)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def fetch_masks(endpoint: str, img: NightImage, timeout_ms: int = 10_000, retries: int = 2,
                image_id: str = "") -> MaskSet:
    """Request masks for one image from the segmentation service.

    Transport failures (timeouts, refused connections) are retried up to
    `retries` extra attempts; anything else fails fast.
    """
    url = endpoint.rstrip("/") + "/v1/segment"
    body = {"image_id": image_id, "png_base64": png_base64(img)}
    timeout_s = timeout_ms / 1000.0
    last_exc: Exception | None = None
    resp = None
    for attempt in range(retries + 1):
        try:
            resp = requests.post(url, json=body, timeout=timeout_s)
            break
        except (requests.Timeout, requests.ConnectionError) as e:
            last_exc = e
            if attempt < retries:
                time.sleep(0.05)
    if resp is None:
        raise TransportError(f"segmentation service unreachable after {retries + 1} attempts: {last_exc}")

    if resp.status_code != 200:
        raise ProtocolError(f"segmentation service returned HTTP {resp.status_code}: {resp.text[:200]}")
    try:
        obj = resp.json()
    except ValueError as e:
        raise ProtocolError(f"segmentation service returned non-JSON body: {e}") from e
    if not isinstance(obj, dict):
        raise ProtocolError("segmentation response is not a JSON object")
    try:
        ms = _mask_set_from_dict(obj, where="response")
    except ManifestError as e:
        raise ProtocolError(f"segmentation response violates the wire schema: {e}") from e
    if ms.image_id != image_id:
        raise ProtocolError(f"response image_id {ms.image_id!r} does not echo request {image_id!r}")
    if ms.width != img.width or ms.height != img.height:
        raise MaskValidationError(
            f"response dimensions {ms.width}x{ms.height} differ from image {img.width}x{img.height}"
        )
    validate_mask_set(ms)
    return ms
