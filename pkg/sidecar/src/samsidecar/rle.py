"""Column-major uncompressed RLE, matching the wire format the clients expect.

bbox and area are always recomputed here from the mask itself, never taken
from a model's own bookkeeping, so responses cannot carry inconsistent
annotations.
"""

from __future__ import annotations

import numpy as np


def encode_column_major(bits: np.ndarray) -> list[int]:
    """Runs alternate background/foreground starting at background."""
    flat = np.asarray(bits, dtype=bool).ravel(order="F")
    if flat.size == 0:
        return []
    changes = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], changes, [flat.size]))
    counts = np.diff(bounds).tolist()
    if flat[0]:
        counts = [0] + counts
    return [int(c) for c in counts]


def mask_entry(bits: np.ndarray, score: float) -> dict:
    """Wire-shaped mask object with bbox/area derived from the bits."""
    rows = np.flatnonzero(bits.any(axis=1))
    cols = np.flatnonzero(bits.any(axis=0))
    if rows.size == 0:
        raise ValueError("refusing to encode an empty mask")
    x0, x1 = int(cols[0]), int(cols[-1])
    y0, y1 = int(rows[0]), int(rows[-1])
    return {
        "counts": encode_column_major(bits),
        "bbox": [float(x0), float(y0), float(x1 - x0 + 1), float(y1 - y0 + 1)],
        "area": int(bits.sum()),
        "score": float(score),
    }
