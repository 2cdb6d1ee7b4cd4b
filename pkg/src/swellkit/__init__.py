"""swellkit: one-to-many training-sample generation and tracking benchmark tooling.

The toolkit covers the data side of nighttime UAV tracker adaptation:
segmentation masks in (from a service, a manifest, or a synthetic
segmenter), template/search patch pairs out, plus the one-pass evaluation
protocol and a small adversarial feature-alignment demo.
"""

from swellkit.geometry import BBox, BinaryMask, NightImage, RleMask, cle, iou, mask_to_bbox, rle_decode, rle_encode
from swellkit.crops import CropConfig, Patch, TrainingSample, crop_patch, make_sample
from swellkit.masks import MaskEntry, MaskSet, ManifestRecord, load_manifest, synthetic_segment, fetch_masks
from swellkit.swelling import SwellConfig, SwellReport, subsample, swell_image, swell_dataset
from swellkit.stats import AiHistogram, ambient_intensity, is_lai

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "BinaryMask",
    "NightImage",
    "RleMask",
    "iou",
    "cle",
    "mask_to_bbox",
    "rle_encode",
    "rle_decode",
    "CropConfig",
    "Patch",
    "TrainingSample",
    "crop_patch",
    "make_sample",
    "MaskEntry",
    "MaskSet",
    "ManifestRecord",
    "load_manifest",
    "synthetic_segment",
    "fetch_masks",
    "SwellConfig",
    "SwellReport",
    "subsample",
    "swell_image",
    "swell_dataset",
    "AiHistogram",
    "ambient_intensity",
    "is_lai",
    "__version__",
]
