"""Deterministic synthetic nighttime scenes shared across the test suite.

Scenes are dark backgrounds with bright axis-aligned rectangles, so the
expected masks, boxes, and areas are known by construction.
"""

from pathlib import Path

import numpy as np
from PIL import Image

from swellkit.geometry import NightImage

BG = (10, 10, 12)        # luma ~10.2, well under the default threshold
FG = (200, 200, 200)     # luma 200


def blank_scene(width: int, height: int, color=BG) -> np.ndarray:
    img = np.zeros((height, width, 3), dtype=np.uint8)
    img[:, :] = color
    return img


def paint_rect(pixels: np.ndarray, x: int, y: int, w: int, h: int, color=FG) -> None:
    pixels[y:y + h, x:x + w] = color


def scene_with_rects(width: int, height: int, rects, color=FG) -> NightImage:
    pixels = blank_scene(width, height)
    for (x, y, w, h) in rects:
        paint_rect(pixels, x, y, w, h, color)
    return NightImage(pixels)


def cell_rects(width: int, height: int, n_objects: int, rng: np.random.Generator,
               min_side: int = 10, max_side: int = 24):
    """n non-touching rectangles, one per vertical strip of the image."""
    cell_w = width // n_objects
    rects = []
    for i in range(n_objects):
        w = int(rng.integers(min_side, max_side + 1))
        h = int(rng.integers(min_side, max_side + 1))
        x0 = i * cell_w + 2
        x = x0 + int(rng.integers(0, max(1, cell_w - w - 4)))
        y = 2 + int(rng.integers(0, max(1, height - h - 4)))
        rects.append((x, y, w, h))
    return rects


def write_corpus(root: Path, n_images: int, objects_per_image: int = 3,
                 width: int = 192, height: int = 128, seed: int = 123):
    """Write PNG scenes to root; returns {image_id: rects}."""
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    layout = {}
    for i in range(n_images):
        image_id = f"img{i:03d}"
        rects = cell_rects(width, height, objects_per_image, rng)
        img = scene_with_rects(width, height, rects)
        Image.fromarray(np.asarray(img.pixels)).save(root / f"{image_id}.png", format="PNG")
        layout[image_id] = rects
    return layout
