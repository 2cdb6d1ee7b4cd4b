"""The HTTP surface: /v1/segment and /v1/health.

Model access is serialized behind a lock (one inference at a time); the
health endpoint never takes that lock. Until the model finishes loading,
/v1/health and /v1/segment both answer 503.
"""

from __future__ import annotations

import base64
import binascii
import io
import threading
from contextlib import asynccontextmanager

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel

from samsidecar.backends import make_generator
from samsidecar.config import SidecarConfig


class SegmentRequest(BaseModel):
    image_id: str
    png_base64: str


class SegmentService:
    def __init__(self, cfg: SidecarConfig):
        self.cfg = cfg
        self.generator = make_generator(cfg)
        self.loaded = False
        self._inference_lock = threading.Lock()

    def load(self) -> None:
        self.generator.load()
        self.loaded = True

    def metadata(self) -> dict:
        return {
            "model": self.generator.model_id,
            "settings": self.cfg.generator_settings(),
            "deterministic": self.generator.deterministic,
        }

    def segment(self, image_id: str, pixels: np.ndarray) -> dict:
        with self._inference_lock:
            masks = self.generator.generate(pixels)
        return {
            "image_id": image_id,
            "width": int(pixels.shape[1]),
            "height": int(pixels.shape[0]),
            "masks": masks,
            "metadata": self.metadata(),
        }


def _decode_png(png_base64: str) -> np.ndarray:
    if not png_base64.strip():
        raise HTTPException(status_code=422, detail="empty image")
    try:
        raw = base64.b64decode(png_base64, validate=True)
    except (binascii.Error, ValueError):
        raise HTTPException(status_code=400, detail="png_base64 is not valid base64")
    try:
        with Image.open(io.BytesIO(raw)) as im:
            pixels = np.asarray(im.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError):
        raise HTTPException(status_code=400, detail="undecodable image")
    if pixels.size == 0:
        raise HTTPException(status_code=422, detail="empty image")
    return pixels


def create_app(cfg: SidecarConfig | None = None) -> FastAPI:
    cfg = cfg or SidecarConfig()
    service = SegmentService(cfg)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        service.load()
        yield

    app = FastAPI(title="sam-sidecar", lifespan=lifespan)
    app.state.service = service

    @app.get("/v1/health")
    def health():
        if not service.loaded:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return {"status": "ok", "model": service.generator.model_id,
                "settings": cfg.generator_settings()}

    @app.post("/v1/segment")
    def segment(req: SegmentRequest):
        if not service.loaded:
            raise HTTPException(status_code=503, detail="model not loaded")
        pixels = _decode_png(req.png_base64)
        return service.segment(req.image_id, pixels)

    return app
