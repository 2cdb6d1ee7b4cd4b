"""Segmentation sidecar: automatic mask generation behind a small HTTP API."""

from samsidecar.config import SidecarConfig
from samsidecar.server import create_app

__version__ = "0.1.0"

__all__ = ["SidecarConfig", "create_app", "__version__"]
