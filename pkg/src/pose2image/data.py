"""Pose-annotated RGBD trajectory datasets: disk layout, loading, splits.

Two on-disk formats are supported:

* the native layout (also written by the synthetic scene renderer):
    root/meta.json                          width/height/fx/fy/cx/cy,
                                            depth_scale (1000 = millimeters),
                                            depth_max_m, bounds{center,extent}
    root/seq_000/frame_000001.color.png     8-bit RGB
    root/seq_000/frame_000001.depth.png     16-bit single channel, millimeters
    root/seq_000/poses.txt                  "i tx ty tz qw qx qy qz" per frame

* the 7-Scenes public release layout: seq-NN directories with per-frame
  frame-XXXXXX.color.png / .depth.png / .pose.txt, the pose file holding a
  4x4 row-major camera-to-world matrix.

Frame ids are 1-based throughout so the missing-run split formula
(frames 100m+1 .. 100m+N held out) reads off directly.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DataFormatError, SplitError
from .pose import Pose7, SceneBounds, canonicalize, matrix_to_quat

DEPTH_SCALE = 1000  # stored depth unit: millimeters
_ROT_ORTHO_TOL = 1e-3

# 7-Scenes cameras (Kinect, 640x480); the release ships no intrinsics files.
_SEVENSCENES_INTRINSICS = dict(fx=585.0, fy=585.0, cx=320.0, cy=240.0, width=640, height=480)


@dataclass(frozen=True)
class Intrinsics:
    """Pinhole camera model in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    @staticmethod
    def square(resolution: int, fov_deg: float = 70.0) -> "Intrinsics":
        """Square image with the given horizontal field of view."""
        f = (resolution / 2.0) / np.tan(np.radians(fov_deg) / 2.0)
        c = resolution / 2.0
        return Intrinsics(fx=f, fy=f, cx=c, cy=c, width=resolution, height=resolution)


@dataclass
class RGBDFrame:
    """One sample: RGB image, depth map (mm), camera pose, indices."""

    rgb: np.ndarray      # (H, W, 3) uint8
    depth: np.ndarray    # (H, W) uint16, millimeters
    pose: Pose7
    seq_id: int
    frame_id: int        # 1-based within the sequence

    def __post_init__(self):
        if self.rgb.shape[:2] != self.depth.shape:
            raise DataFormatError(
                f"rgb {self.rgb.shape} and depth {self.depth.shape} disagree "
                f"(seq {self.seq_id}, frame {self.frame_id})"
            )
        if self.frame_id < 1:
            raise DataFormatError("frame ids are 1-based")


@dataclass
class TrajectoryDataset:
    sequences: list[list[RGBDFrame]]
    intrinsics: Intrinsics
    bounds: SceneBounds
    depth_max_m: float

    @property
    def resolution(self) -> tuple[int, int]:
        f = self.sequences[0][0]
        return f.rgb.shape[0], f.rgb.shape[1]

    def frame(self, seq_id: int, frame_id: int) -> RGBDFrame:
        return self.sequences[seq_id][frame_id - 1]

    def all_ids(self) -> list[tuple[int, int]]:
        return [(f.seq_id, f.frame_id) for seq in self.sequences for f in seq]


@dataclass
class SplitPlan:
    setting: str                      # "a", "b" or "c"
    N: int
    train_ids: list[tuple[int, int]]  # (seq_id, frame_id)
    test_ids: list[tuple[int, int]]

    def to_json(self) -> str:
        return json.dumps(
            {
                "setting": self.setting,
                "N": self.N,
                "train": [list(p) for p in self.train_ids],
                "test": [list(p) for p in self.test_ids],
            }
        )

    @staticmethod
    def from_json(text: str) -> "SplitPlan":
        obj = json.loads(text)
        return SplitPlan(
            setting=obj["setting"],
            N=int(obj["N"]),
            train_ids=[tuple(p) for p in obj["train"]],
            test_ids=[tuple(p) for p in obj["test"]],
        )

    def save(self, path):
        Path(path).write_text(self.to_json())

    @staticmethod
    def load(path) -> "SplitPlan":
        return SplitPlan.from_json(Path(path).read_text())


# ---------------------------------------------------------------------------
# PNG helpers

def write_color_png(path, rgb: np.ndarray):
    if rgb.dtype != np.uint8 or rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DataFormatError(f"color image must be (H, W, 3) uint8, got {rgb.dtype} {rgb.shape}")
    Image.fromarray(rgb, mode="RGB").save(path)


def read_color_png(path) -> np.ndarray:
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def write_depth_png(path, depth_mm: np.ndarray):
    if depth_mm.ndim != 2:
        raise DataFormatError(f"depth image must be 2-D, got {depth_mm.shape}")
    Image.fromarray(depth_mm.astype(np.uint16)).save(path)


def read_depth_png(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.dtype == np.uint16:
        return arr
    arr = arr.astype(np.int64)
    if arr.min() < 0 or arr.max() > 65535:
        raise DataFormatError(f"depth png {path} exceeds 16-bit range")
    return arr.astype(np.uint16)


# ---------------------------------------------------------------------------
# Native layout

def _seq_dir(root: Path, k: int) -> Path:
    return root / f"seq_{k:03d}"


def save_dataset(root, sequences, intrinsics: Intrinsics, bounds: SceneBounds, depth_max_m: float):
    """Write frames to the native layout. ``sequences`` is a list of lists of
    (rgb uint8, depth_mm uint16, Pose7) triples; frame ids are assigned 1-based
    in order."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    meta = {
        "width": intrinsics.width,
        "height": intrinsics.height,
        "fx": intrinsics.fx,
        "fy": intrinsics.fy,
        "cx": intrinsics.cx,
        "cy": intrinsics.cy,
        "depth_scale": DEPTH_SCALE,
        "depth_max_m": float(depth_max_m),
        "bounds": {"center": bounds.center.tolist(), "extent": bounds.extent.tolist()},
    }
    (root / "meta.json").write_text(json.dumps(meta, indent=2))
    for k, seq in enumerate(sequences):
        d = _seq_dir(root, k)
        d.mkdir(exist_ok=True)
        lines = []
        for i, (rgb, depth_mm, pose) in enumerate(seq, start=1):
            write_color_png(d / f"frame_{i:06d}.color.png", rgb)
            write_depth_png(d / f"frame_{i:06d}.depth.png", depth_mm)
            vals = " ".join(f"{x:.17g}" for x in pose.as_vector())
            lines.append(f"{i} {vals}")
        (d / "poses.txt").write_text("\n".join(lines) + "\n")


def _load_native(root: Path) -> TrajectoryDataset:
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise DataFormatError(f"missing {meta_path}")
    meta = json.loads(meta_path.read_text())
    intr = Intrinsics(
        fx=meta["fx"], fy=meta["fy"], cx=meta["cx"], cy=meta["cy"],
        width=meta["width"], height=meta["height"],
    )
    if meta.get("depth_scale", DEPTH_SCALE) != DEPTH_SCALE:
        raise DataFormatError(f"unsupported depth_scale {meta['depth_scale']} in {meta_path}")
    bounds = SceneBounds(np.array(meta["bounds"]["center"]), np.array(meta["bounds"]["extent"]))

    seq_dirs = sorted(p for p in root.iterdir() if p.is_dir() and re.fullmatch(r"seq_\d{3}", p.name))
    if not seq_dirs:
        raise DataFormatError(f"no seq_* directories under {root}")
    sequences = []
    for k, d in enumerate(seq_dirs):
        poses_path = d / "poses.txt"
        if not poses_path.is_file():
            raise DataFormatError(f"missing {poses_path}")
        frames = []
        entries = []
        for line in poses_path.read_text().splitlines():
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 8:
                raise DataFormatError(f"bad pose line in {poses_path}: {line!r}")
            entries.append((int(parts[0]), np.array([float(x) for x in parts[1:]])))
        entries.sort(key=lambda e: e[0])
        n_color = len(list(d.glob("frame_*.color.png")))
        n_depth = len(list(d.glob("frame_*.depth.png")))
        if n_color != len(entries) or n_depth != len(entries):
            raise DataFormatError(
                f"{d}: poses.txt lists {len(entries)} frames but found "
                f"{n_color} color / {n_depth} depth images"
            )
        for frame_id, vec in entries:
            cpath = d / f"frame_{frame_id:06d}.color.png"
            dpath = d / f"frame_{frame_id:06d}.depth.png"
            if not cpath.is_file():
                raise DataFormatError(f"missing {cpath}")
            if not dpath.is_file():
                raise DataFormatError(f"missing {dpath}")
            frames.append(
                RGBDFrame(
                    rgb=read_color_png(cpath),
                    depth=read_depth_png(dpath),
                    pose=canonicalize(Pose7.from_vector(vec)),
                    seq_id=k,
                    frame_id=frame_id,
                )
            )
        sequences.append(frames)
    return TrajectoryDataset(
        sequences=sequences, intrinsics=intr, bounds=bounds, depth_max_m=float(meta["depth_max_m"])
    )


# ---------------------------------------------------------------------------
# 7-Scenes layout

def _pose_from_matrix(mat: np.ndarray, where: str) -> Pose7:
    R = mat[:3, :3]
    err = np.abs(R.T @ R - np.eye(3)).max()
    if err > _ROT_ORTHO_TOL:
        raise DataFormatError(f"non-orthonormal rotation in {where} (|R'R - I| = {err:.2e})")
    return canonicalize(Pose7(mat[:3, 3], matrix_to_quat(R)))


def _load_sevenscenes(root: Path) -> TrajectoryDataset:
    seq_dirs = sorted(p for p in root.iterdir() if p.is_dir() and re.match(r"seq-\d+", p.name))
    if not seq_dirs:
        seq_dirs = [root]  # a single sequence directory was passed directly
    sequences = []
    translations = []
    depth_samples = []
    for k, d in enumerate(seq_dirs):
        pose_files = sorted(d.glob("frame-*.pose.txt"))
        if not pose_files:
            raise DataFormatError(f"no frame-*.pose.txt files under {d}")
        frames = []
        for i, pf in enumerate(pose_files, start=1):
            stem = pf.name[: -len(".pose.txt")]
            cpath = d / f"{stem}.color.png"
            dpath = d / f"{stem}.depth.png"
            if not cpath.is_file():
                raise DataFormatError(f"missing {cpath}")
            if not dpath.is_file():
                raise DataFormatError(f"missing {dpath}")
            mat = np.loadtxt(pf).reshape(4, 4)
            pose = _pose_from_matrix(mat, str(pf))
            depth = read_depth_png(dpath)
            frames.append(
                RGBDFrame(rgb=read_color_png(cpath), depth=depth, pose=pose, seq_id=k, frame_id=i)
            )
            translations.append(pose.t)
            valid = depth[(depth > 0) & (depth < 65535)]
            if valid.size:
                depth_samples.append(valid)
        sequences.append(frames)
    bounds = SceneBounds.from_translations(np.array(translations))
    if depth_samples:
        depth_max_m = float(np.percentile(np.concatenate(depth_samples), 99.9)) / DEPTH_SCALE
    else:
        depth_max_m = 1.0
    f0 = sequences[0][0]
    h, w = f0.rgb.shape[:2]
    # nominal Kinect intrinsics, rescaled if the frames are not 640x480
    sx, sy = w / _SEVENSCENES_INTRINSICS["width"], h / _SEVENSCENES_INTRINSICS["height"]
    intr = Intrinsics(
        fx=_SEVENSCENES_INTRINSICS["fx"] * sx, fy=_SEVENSCENES_INTRINSICS["fy"] * sy,
        cx=_SEVENSCENES_INTRINSICS["cx"] * sx, cy=_SEVENSCENES_INTRINSICS["cy"] * sy,
        width=w, height=h,
    )
    return TrajectoryDataset(sequences=sequences, intrinsics=intr, bounds=bounds, depth_max_m=depth_max_m)


def load_dataset(root, format: str = "cp2v2") -> TrajectoryDataset:
    """Load a trajectory dataset. ``format`` is "cp2v2" (native) or "sevenscenes"."""
    root = Path(root)
    if not root.is_dir():
        raise DataFormatError(f"dataset root {root} does not exist")
    if format == "cp2v2":
        return _load_native(root)
    if format == "sevenscenes":
        return _load_sevenscenes(root)
    raise DataFormatError(f"unknown dataset format {format!r}")


# ---------------------------------------------------------------------------
# Splits

def make_split(ds: TrajectoryDataset, setting: str, N: int = 1, test_seqs=None) -> SplitPlan:
    """Build the train/held-out plan for one of the three experiment settings.

    Setting "a" holds out runs of N frames after every 100th frame of each
    sequence: frames 100m+1 .. 100m+N for m = 1..M with 100M+N <= length.
    Setting "b"/"c" hold out whole sequences listed in ``test_seqs``.
    """
    if setting == "a":
        if N < 1:
            raise SplitError("setting a needs N >= 1")
        train, test = [], []
        for seq in ds.sequences:
            length = len(seq)
            M = (length - N) // 100
            if M < 1:
                raise SplitError(
                    f"sequence {seq[0].seq_id} has {length} frames; "
                    f"needs at least {100 + N} for setting a with N={N}"
                )
            held = set()
            for m in range(1, M + 1):
                held.update(range(100 * m + 1, 100 * m + N + 1))
            for f in seq:
                (test if f.frame_id in held else train).append((f.seq_id, f.frame_id))
        return SplitPlan(setting="a", N=N, train_ids=train, test_ids=test)

    if setting in ("b", "c"):
        if not test_seqs:
            raise SplitError(f"setting {setting} needs test_seqs")
        test_seqs = set(int(s) for s in test_seqs)
        all_seqs = set(range(len(ds.sequences)))
        if not test_seqs <= all_seqs:
            raise SplitError(f"test_seqs {sorted(test_seqs)} outside dataset sequences {sorted(all_seqs)}")
        train_seqs = all_seqs - test_seqs
        if not train_seqs:
            raise SplitError("all sequences held out; nothing left to train on")
        train = [(f.seq_id, f.frame_id) for s in sorted(train_seqs) for f in ds.sequences[s]]
        test = [(f.seq_id, f.frame_id) for s in sorted(test_seqs) for f in ds.sequences[s]]
        return SplitPlan(setting=setting, N=0, train_ids=train, test_ids=test)

    raise SplitError(f"unknown setting {setting!r}")


# ---------------------------------------------------------------------------
# Network-range conversion

def normalize_frame(frame: RGBDFrame, depth_max_m: float) -> np.ndarray:
    """(4, H, W) float32 in [-1, 1], channels (R, G, B, D)."""
    if depth_max_m <= 0:
        raise ValueError("depth_max_m must be positive")
    rgb = frame.rgb.astype(np.float32) / 127.5 - 1.0
    d_m = frame.depth.astype(np.float32) / DEPTH_SCALE
    d = np.clip(d_m / depth_max_m, 0.0, 1.0) * 2.0 - 1.0
    return np.concatenate([rgb.transpose(2, 0, 1), d[None]], axis=0)


def denormalize_frame(t: np.ndarray, depth_max_m: float) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of normalize_frame: (rgb uint8 (H, W, 3), depth uint16 mm)."""
    t = np.asarray(t)
    if t.ndim != 3 or t.shape[0] not in (3, 4):
        raise ValueError(f"expected (3|4, H, W) tensor, got {t.shape}")
    rgb = np.clip(np.rint((t[:3] + 1.0) * 127.5), 0, 255).astype(np.uint8).transpose(1, 2, 0)
    if t.shape[0] == 4:
        d_m = (t[3] + 1.0) / 2.0 * depth_max_m
        depth = np.clip(np.rint(d_m * DEPTH_SCALE), 0, 65535).astype(np.uint16)
    else:
        depth = np.zeros(t.shape[1:], dtype=np.uint16)
    return rgb, depth
