"""Mask-generator backends.

The builtin generator is a deterministic grid-prompted region grower: seed
points on a regular grid each grow a 4-connected region of pixels whose
luma stays within a tolerance of the seed's luma. Its confidence score is
a stability estimate in the spirit of automatic mask generation: the area
ratio between the region grown at half tolerance and at full tolerance.
It exists so the service runs (and tests run) without model weights.

The sam backend wraps segment-anything's automatic mask generator when the
package and a checkpoint are available; it is imported lazily and never
required.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from samsidecar.config import SidecarConfig
from samsidecar.rle import mask_entry


def _milli_luma(pixels: np.ndarray) -> np.ndarray:
    px = pixels.astype(np.int64)
    return 299 * px[..., 0] + 587 * px[..., 1] + 114 * px[..., 2]


class GridPromptGenerator:
    """Deterministic promptable-segmentation stand-in."""

    model_id = "builtin-gridseg-v1"
    deterministic = True

    def __init__(self, cfg: SidecarConfig):
        self.cfg = cfg

    def load(self) -> None:
        pass  # nothing to load; kept for interface symmetry

    def _seed_region(self, luma: np.ndarray, row: int, col: int, tol_milli: int) -> np.ndarray:
        within = np.abs(luma - luma[row, col]) <= tol_milli
        labels, _ = ndimage.label(within)  # default structure = 4-connectivity
        return labels == labels[row, col]

    def generate(self, pixels: np.ndarray) -> list[dict]:
        h, w = pixels.shape[:2]
        luma = _milli_luma(pixels)
        n = self.cfg.points_per_side
        tol = int(self.cfg.luma_tolerance) * 1000
        max_area = self.cfg.max_region_fraction * h * w
        score_floor = max(self.cfg.pred_iou_thresh, self.cfg.stability_score_thresh)

        seen: set[bytes] = set()
        results = []
        rows = np.linspace(0, h - 1, n).round().astype(int)
        cols = np.linspace(0, w - 1, n).round().astype(int)
        for r in rows:
            for c in cols:
                region = self._seed_region(luma, int(r), int(c), tol)
                key = np.packbits(region).tobytes()
                if key in seen:
                    continue
                seen.add(key)
                area = int(region.sum())
                if area == 0 or area > max_area:
                    continue
                half = self._seed_region(luma, int(r), int(c), tol // 2)
                score = float(half.sum()) / area
                if score < score_floor:
                    continue
                results.append((area, mask_entry(region, score)))
        results.sort(key=lambda t: (-t[0], t[1]["bbox"][1], t[1]["bbox"][0]))
        return [entry for _, entry in results]


class SamGenerator:
    """segment-anything automatic mask generator, when installed."""

    deterministic = False  # GPU kernels; flagged in response metadata

    def __init__(self, cfg: SidecarConfig):
        self.cfg = cfg
        self.model_id = f"sam:{cfg.checkpoint}"
        self._generator = None

    def load(self) -> None:
        try:
            from segment_anything import SamAutomaticMaskGenerator, sam_model_registry
        except ImportError as e:
            raise RuntimeError("the sam backend needs the segment-anything package") from e
        model_type = "vit_h" if "vit_h" in str(self.cfg.checkpoint) else (
            "vit_l" if "vit_l" in str(self.cfg.checkpoint) else "vit_b")
        sam = sam_model_registry[model_type](checkpoint=self.cfg.checkpoint)
        sam.to(self.cfg.device)
        self.model_id = f"sam:{model_type}"
        self._generator = SamAutomaticMaskGenerator(
            sam,
            points_per_side=self.cfg.points_per_side,
            pred_iou_thresh=self.cfg.pred_iou_thresh,
            stability_score_thresh=self.cfg.stability_score_thresh,
        )

    def generate(self, pixels: np.ndarray) -> list[dict]:
        if self._generator is None:
            raise RuntimeError("model not loaded")
        raw = self._generator.generate(pixels)
        raw.sort(key=lambda m: -int(np.asarray(m["segmentation"]).sum()))
        return [mask_entry(np.asarray(m["segmentation"], dtype=bool),
                           float(np.clip(m.get("predicted_iou", 1.0), 0.0, 1.0)))
                for m in raw]


def make_generator(cfg: SidecarConfig):
    return SamGenerator(cfg) if cfg.backend == "sam" else GridPromptGenerator(cfg)
