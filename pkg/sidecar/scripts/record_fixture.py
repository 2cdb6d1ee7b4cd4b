#!/usr/bin/env python3
"""Record the sidecar's golden-scene response as the client-side test fixture.

Regenerates tests/fixtures/segment_response.json at the repository root so
the main toolkit's service-client tests replay a real recorded response
without the sidecar running.
"""

import base64
import io
import sys
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient
from PIL import Image

from samsidecar.config import SidecarConfig
from samsidecar.server import create_app

REPO_ROOT = Path(__file__).resolve().parents[2]
FIXTURE = REPO_ROOT / "tests" / "fixtures" / "segment_response.json"


def golden_scene() -> np.ndarray:
    # must match golden_image() in the toolkit's service-client tests
    px = np.zeros((48, 64, 3), dtype=np.uint8)
    px[:, :] = (8, 8, 10)
    px[4:14, 3:13] = (220, 220, 220)
    px[20:32, 24:40] = (180, 190, 200)
    px[36:44, 50:60] = (240, 210, 160)
    return px


def main() -> int:
    buf = io.BytesIO()
    Image.fromarray(golden_scene()).save(buf, format="PNG")
    with TestClient(create_app(SidecarConfig())) as client:
        response = client.post("/v1/segment", json={
            "image_id": "golden-001",
            "png_base64": base64.b64encode(buf.getvalue()).decode("ascii"),
        })
    response.raise_for_status()
    FIXTURE.parent.mkdir(parents=True, exist_ok=True)
    FIXTURE.write_bytes(response.content + b"\n")
    print(f"wrote {FIXTURE} ({len(response.json()['masks'])} masks)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
