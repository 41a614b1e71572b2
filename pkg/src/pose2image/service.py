"""HTTP inference service over a frozen checkpoint.

JSON in, PNG out. Forward passes run under a lock so concurrent identical
requests produce identical bytes; nothing here mutates the checkpoint.
"""

from __future__ import annotations

import json
import threading

import numpy as np
from fastapi import FastAPI, Request, Response

from .errors import InvalidPoseError
from .metrics import benchmark_fps
from .networks import ModelBundle
from .synthesis import SynthesisContext, encode_png_depth16, encode_png_rgb, synthesize
from .validation import check_pose_vector

SUPPORTED_FORMATS = ("png_rgb", "png_depth16")
OUT_OF_BOUNDS_FACTOR = 2.0  # beyond this multiple of the extent we warn


def _error(status: int, code: str, detail: str = "") -> Response:
    body = {"error": code}
    if detail:
        body["detail"] = detail
    return Response(
        content=json.dumps(body), status_code=status, media_type="application/json"
    )


def create_app(bundle: ModelBundle, ctx: SynthesisContext, checkpoint_id: str) -> FastAPI:
    app = FastAPI(title="pose2image service")
    lock = threading.Lock()
    fps_cache: dict[str, float] = {}
    bundle.eval_mode()

    @app.get("/health")
    def health():
        return Response(content="ok", media_type="text/plain")

    @app.get("/info")
    def info():
        if "fps" not in fps_cache:
            with lock:
                fps_cache["fps"] = benchmark_fps(bundle, ctx, n_warmup=2, n_timed=10).fps_mean
        return {
            "resolution": bundle.config.resolution,
            "in_channels": bundle.config.in_channels,
            "bounds": {
                "center": ctx.bounds.center.tolist(),
                "extent": ctx.bounds.extent.tolist(),
            },
            "depth_max_m": ctx.depth_max_m,
            "checkpoint_id": checkpoint_id,
            "fps_estimate": fps_cache["fps"],
        }

    @app.post("/synthesize")
    async def synthesize_endpoint(request: Request):
        try:
            payload = json.loads(await request.body())
        except (json.JSONDecodeError, UnicodeDecodeError):
            return _error(400, "malformed_json")
        if not isinstance(payload, dict) or "pose" not in payload:
            return _error(400, "malformed_json", "body must be a JSON object with a 'pose' field")

        fmt = payload.get("format", "png_rgb")
        if fmt not in SUPPORTED_FORMATS:
            return _error(415, "unsupported_format", f"supported: {', '.join(SUPPORTED_FORMATS)}")
        enhanced = bool(payload.get("enhanced", True))
        try:
            pose = check_pose_vector(payload["pose"])
        except (InvalidPoseError, TypeError, ValueError) as exc:
            return _error(400, "invalid_pose", str(exc))

        headers = {}
        rel = np.abs(pose.t - ctx.bounds.center) / ctx.bounds.extent
        if np.any(rel > OUT_OF_BOUNDS_FACTOR):
            headers["X-P2I-Warning"] = "pose_far_outside_training_bounds"

        with lock:
            ((rgb, depth),) = synthesize(bundle, [pose], ctx, enhanced=enhanced)
        data = encode_png_rgb(rgb) if fmt == "png_rgb" else encode_png_depth16(depth)
        return Response(content=data, media_type="image/png", headers=headers)

    return app
