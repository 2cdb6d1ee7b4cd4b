import argparse
import os
import sys

import uvicorn

from samsidecar.config import SidecarConfig
from samsidecar.server import create_app


def parse_args(argv=None) -> SidecarConfig:
    env = os.environ
    ap = argparse.ArgumentParser(prog="sam-sidecar", description="segmentation mask service")
    ap.add_argument("--backend", choices=("builtin", "sam"),
                    default=env.get("SAM_SIDECAR_BACKEND", "builtin"))
    ap.add_argument("--checkpoint", default=env.get("SAM_SIDECAR_CHECKPOINT"))
    ap.add_argument("--device", default=env.get("SAM_SIDECAR_DEVICE", "cpu"))
    ap.add_argument("--points-per-side", type=int, default=8)
    ap.add_argument("--pred-iou-thresh", type=float, default=0.7)
    ap.add_argument("--stability-score-thresh", type=float, default=0.8)
    ap.add_argument("--luma-tolerance", type=int, default=25)
    ap.add_argument("--max-region-fraction", type=float, default=0.5)
    ap.add_argument("--host", default=env.get("SAM_SIDECAR_HOST", "127.0.0.1"))
    ap.add_argument("--port", type=int, default=int(env.get("SAM_SIDECAR_PORT", "8765")))
    args = ap.parse_args(argv)
    return SidecarConfig(
        backend=args.backend, checkpoint=args.checkpoint, device=args.device,
        points_per_side=args.points_per_side, pred_iou_thresh=args.pred_iou_thresh,
        stability_score_thresh=args.stability_score_thresh,
        luma_tolerance=args.luma_tolerance, max_region_fraction=args.max_region_fraction,
        host=args.host, port=args.port,
    )


def console_main() -> None:
    try:
        cfg = parse_args()
    except ValueError as e:
        print(f"sam-sidecar: {e}", file=sys.stderr)
        sys.exit(1)
    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port)


if __name__ == "__main__":
    console_main()
