"""End-to-end synthesis: raw world pose -> encoded pose -> generator ->
optional enhancement -> 8-bit images. Shared by evaluation, the CLI and the
HTTP service so all paths produce identical bytes for identical poses.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
import torch
from PIL import Image

from .data import denormalize_frame
from .networks import ModelBundle
from .pose import Pose7, SceneBounds, canonicalize, encode_pose


@dataclass(frozen=True)
class SynthesisContext:
    """Dataset-derived constants a trained model needs at inference time."""

    bounds: SceneBounds
    depth_max_m: float

    def to_dict(self) -> dict:
        return {
            "bounds": {
                "center": self.bounds.center.tolist(),
                "extent": self.bounds.extent.tolist(),
            },
            "depth_max_m": self.depth_max_m,
        }

    @staticmethod
    def from_dict(d: dict) -> "SynthesisContext":
        return SynthesisContext(
            bounds=SceneBounds(np.array(d["bounds"]["center"]), np.array(d["bounds"]["extent"])),
            depth_max_m=float(d["depth_max_m"]),
        )


def encode_poses(poses, bounds: SceneBounds) -> np.ndarray:
    """Canonicalize and encode a list of Pose7 (or raw 7-vectors) to (N, 7)."""
    out = []
    for p in poses:
        if not isinstance(p, Pose7):
            p = Pose7.from_vector(np.asarray(p, dtype=np.float64))
        out.append(encode_pose(canonicalize(p), bounds))
    return np.stack(out).astype(np.float32)


def synthesize(
    bundle: ModelBundle,
    poses,
    ctx: SynthesisContext,
    enhanced: bool = True,
    batch_size: int = 16,
) -> list[tuple[np.ndarray, np.ndarray]]:
    """Render poses through the trained model.

    Returns one (rgb uint8 (H, W, 3), depth uint16 mm (H, W)) pair per pose.
    Depth comes from the generator's depth channel (zeros for RGB-only
    models); RGB comes from the enhancer unless ``enhanced`` is off.
    """
    enc = torch.from_numpy(encode_poses(poses, ctx.bounds))
    bundle.eval_mode()
    results = []
    with torch.no_grad():
        for start in range(0, enc.shape[0], batch_size):
            batch = enc[start : start + batch_size]
            img = bundle.generator(batch)
            rgb_norm = bundle.enet(img) if enhanced else img[:, :3]
            for i in range(img.shape[0]):
                if bundle.config.in_channels == 4:
                    full = torch.cat([rgb_norm[i], img[i, 3:4]], dim=0)
                else:
                    full = rgb_norm[i]
                rgb, depth = denormalize_frame(full.numpy(), ctx.depth_max_m)
                results.append((rgb, depth))
    return results


def encode_png_rgb(rgb: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(rgb, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def encode_png_depth16(depth_mm: np.ndarray) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(depth_mm.astype(np.uint16)).save(buf, format="PNG")
    return buf.getvalue()
