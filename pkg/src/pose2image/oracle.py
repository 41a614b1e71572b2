"""Deterministic synthetic RGBD renderer used as ground truth.

The scene is a closed axis-aligned box room centered at the origin, each wall
carrying a checkerboard texture with its own base color. A pinhole camera
inside the room ray-casts against the six wall planes; the stored depth is
z-depth (distance along the optical axis), in millimeters, matching common
RGBD camera output.

Everything is a pure function of (scene, pose, intrinsics): the same inputs
always produce bit-identical frames.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import DEPTH_SCALE, Intrinsics, TrajectoryDataset, load_dataset, save_dataset
from .errors import InvalidParamsError, InvalidPoseError
from .pose import Pose7, SceneBounds, look_at

# Saturated, mutually distant base colors; one per wall, assignment shuffled
# by the scene seed. The paired checker color is a darkened copy.
_PALETTE = np.array(
    [
        [0.86, 0.22, 0.20],
        [0.20, 0.78, 0.28],
        [0.22, 0.38, 0.92],
        [0.92, 0.86, 0.20],
        [0.85, 0.27, 0.82],
        [0.24, 0.84, 0.86],
    ]
)
_CHECKER_DARKEN = 0.32

# Wall order: (axis, sign) for axis x, y, z.
_WALLS = [(0, 1.0), (0, -1.0), (1, 1.0), (1, -1.0), (2, 1.0), (2, -1.0)]


@dataclass(frozen=True)
class OracleScene:
    """Box room with procedural checkerboard walls."""

    room_half_extent: np.ndarray = field(default_factory=lambda: np.array([2.0, 2.0, 2.0]))
    checker_size: float = 0.5
    seed: int = 0
    palette: np.ndarray | None = None  # optional (6, 3) override, e.g. all-equal walls

    def __post_init__(self):
        he = np.asarray(self.room_half_extent, dtype=np.float64).reshape(3)
        if not np.all(he > 0):
            raise InvalidParamsError(f"room half extents must be positive, got {he}")
        if self.checker_size <= 0:
            raise InvalidParamsError("checker_size must be positive")
        he.setflags(write=False)
        object.__setattr__(self, "room_half_extent", he)
        if self.palette is not None:
            pal = np.asarray(self.palette, dtype=np.float64).reshape(6, 3)
            pal.setflags(write=False)
            object.__setattr__(self, "palette", pal)

    def wall_colors(self) -> np.ndarray:
        """(6, 3) base color per wall, deterministic in the seed."""
        if self.palette is not None:
            return np.asarray(self.palette)
        rng = np.random.default_rng(self.seed)
        return _PALETTE[rng.permutation(6)]

    def contains(self, p, margin: float = 0.0) -> bool:
        p = np.asarray(p, dtype=np.float64).reshape(3)
        return bool(np.all(np.abs(p) < self.room_half_extent - margin))


def render_view(scene: OracleScene, pose: Pose7, K: Intrinsics):
    """Render (rgb uint8 (H, W, 3), depth uint16 mm (H, W)) for one pose.

    The camera must be strictly inside the room. Depth is z-depth: the camera
    frame z coordinate of the hit point, so a fronto-parallel wall has uniform
    depth across the image.
    """
    if not scene.contains(pose.t):
        raise InvalidPoseError(f"camera position {pose.t} is not inside the room")
    H, W = K.height, K.width
    he = scene.room_half_extent
    colors = scene.wall_colors()

    u = (np.arange(W) + 0.5 - K.cx) / K.fx
    v = (np.arange(H) + 0.5 - K.cy) / K.fy
    uu, vv = np.meshgrid(u, v)
    d_cam = np.stack([uu, vv, np.ones_like(uu)], axis=-1)      # (H, W, 3), z = 1
    d_world = d_cam @ pose.rotation_matrix().T                  # (H, W, 3)
    eye = pose.t

    best_t = np.full((H, W), np.inf)
    best_wall = np.full((H, W), -1, dtype=np.int8)
    for wi, (axis, sign) in enumerate(_WALLS):
        denom = d_world[..., axis]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (sign * he[axis] - eye[axis]) / denom
        hit = eye + t[..., None] * d_world
        others = [a for a in range(3) if a != axis]
        valid = (t > 1e-9) & np.isfinite(t)
        for a in others:
            valid &= np.abs(hit[..., a]) <= he[a] + 1e-9
        better = valid & (t < best_t)
        best_t = np.where(better, t, best_t)
        best_wall = np.where(better, wi, best_wall)

    if np.any(best_wall < 0):  # cannot happen for an interior camera
        raise InvalidPoseError("ray escaped the room; degenerate pose")

    # Because d_cam has z = 1, the ray parameter equals the camera-frame z of
    # the hit point, i.e. the z-depth.
    depth_m = best_t
    hit = eye + depth_m[..., None] * d_world

    rgb = np.empty((H, W, 3))
    for wi, (axis, sign) in enumerate(_WALLS):
        mask = best_wall == wi
        if not np.any(mask):
            continue
        o1, o2 = [a for a in range(3) if a != axis]
        # mirrored checkers (|coord| based): the pattern is invariant under the
        # room's axis flips and 90-degree rotations, so with identical wall
        # colors the whole scene inherits the box symmetry
        c1 = np.floor(np.abs(hit[..., o1][mask]) / scene.checker_size).astype(np.int64)
        c2 = np.floor(np.abs(hit[..., o2][mask]) / scene.checker_size).astype(np.int64)
        parity = ((c1 + c2) % 2).astype(np.float64)[:, None]
        base = colors[wi]
        rgb[mask] = base * (1.0 - parity) + base * _CHECKER_DARKEN * parity

    rgb8 = np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)
    depth_mm = np.clip(np.rint(depth_m * DEPTH_SCALE), 0, 65535).astype(np.uint16)
    return rgb8, depth_mm


def make_trajectory(kind: str, n: int, scene: OracleScene, **params) -> list[Pose7]:
    """Ordered camera poses inside the room, all looking at a target point.

    kind "circle": center, radius, optional phase; n poses at 2*pi/n spacing
    in the horizontal plane through center.
    kind "arc": center, radius, theta_start, theta_end; n poses inclusive.
    kind "line": start, end; n poses inclusive.
    """
    if n < 2:
        raise InvalidParamsError("a trajectory needs at least 2 poses")
    target = np.asarray(params.get("target", (0.0, 0.0, 0.0)), dtype=np.float64)

    if kind == "circle":
        center = np.asarray(params.get("center", (0.0, 0.0, 0.0)), dtype=np.float64)
        radius = float(params["radius"])
        phase = float(params.get("phase", 0.0))
        thetas = phase + 2.0 * np.pi * np.arange(n) / n
        positions = center + radius * np.stack(
            [np.cos(thetas), np.sin(thetas), np.zeros(n)], axis=1
        )
    elif kind == "arc":
        center = np.asarray(params.get("center", (0.0, 0.0, 0.0)), dtype=np.float64)
        radius = float(params["radius"])
        t0, t1 = float(params["theta_start"]), float(params["theta_end"])
        thetas = np.linspace(t0, t1, n)
        positions = center + radius * np.stack(
            [np.cos(thetas), np.sin(thetas), np.zeros(n)], axis=1
        )
    elif kind == "line":
        start = np.asarray(params["start"], dtype=np.float64)
        end = np.asarray(params["end"], dtype=np.float64)
        positions = start + np.linspace(0.0, 1.0, n)[:, None] * (end - start)
    else:
        raise InvalidParamsError(f"unknown trajectory kind {kind!r}")

    for p in positions:
        if not scene.contains(p):
            raise InvalidParamsError(f"trajectory position {p} leaves the room")
    return [look_at(p, target) for p in positions]


def generate_dataset(
    scene: OracleScene,
    trajectories: list[list[Pose7]],
    K: Intrinsics,
    out_root,
) -> TrajectoryDataset:
    """Render every trajectory, write the native layout, and load it back."""
    rendered = []
    depths = []
    translations = []
    for traj in trajectories:
        seq = []
        for pose in traj:
            rgb, depth_mm = render_view(scene, pose, K)
            seq.append((rgb, depth_mm, pose))
            depths.append(depth_mm)
            translations.append(pose.t)
        rendered.append(seq)
    depth_max_m = float(np.percentile(np.stack(depths), 99.9)) / DEPTH_SCALE
    bounds = SceneBounds.from_translations(np.array(translations))
    save_dataset(out_root, rendered, K, bounds, depth_max_m)
    return load_dataset(out_root, format="cp2v2")
