from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


@dataclass(frozen=True)
class SidecarConfig:
    """Service settings; the mask-generator block is echoed in every response."""

    backend: str = "builtin"          # "builtin" (grid-prompt region grower) or "sam"
    checkpoint: str | None = None     # required for the sam backend
    device: str = "cpu"
    points_per_side: int = 8
    pred_iou_thresh: float = 0.7
    stability_score_thresh: float = 0.8
    luma_tolerance: int = 25          # builtin: region growth tolerance around the seed luma
    max_region_fraction: float = 0.5  # builtin: drop near-full-frame background regions
    host: str = "127.0.0.1"
    port: int = 8765

    def __post_init__(self):
        if self.backend not in ("builtin", "sam"):
            raise ValueError(f"backend must be 'builtin' or 'sam', got {self.backend!r}")
        if self.points_per_side < 1:
            raise ValueError("points_per_side must be >= 1")
        if not 0.0 <= self.pred_iou_thresh <= 1.0 or not 0.0 <= self.stability_score_thresh <= 1.0:
            raise ValueError("thresholds must lie in [0, 1]")
        if self.backend == "sam":
            if not self.checkpoint:
                raise ValueError("the sam backend needs --checkpoint")
            if not Path(self.checkpoint).is_file():
                raise ValueError(f"checkpoint not readable: {self.checkpoint}")

    def generator_settings(self) -> dict:
        return {
            "points_per_side": self.points_per_side,
            "pred_iou_thresh": self.pred_iou_thresh,
            "stability_score_thresh": self.stability_score_thresh,
            "luma_tolerance": self.luma_tolerance,
            "max_region_fraction": self.max_region_fraction,
            "device": self.device,
        }
