"""Camera pose representation and geometry.

A pose is 7 numbers: translation (tx, ty, tz) in meters, world frame, plus a
unit quaternion (qw, qx, qy, qz) giving the world-from-camera rotation. The
camera convention is OpenCV-style: x right, y down, z forward (optical axis).

Quaternions double-cover rotations; ``canonicalize`` resolves the ambiguity
by normalizing and flipping the sign so qw >= 0.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import InvalidBoundsError, InvalidPoseError

# Two canonicalized poses closer than this are treated as the same rotation.
_QUAT_NORM_TOL = 1e-6


@dataclass(frozen=True)
class Pose7:
    """6DoF camera pose: translation + unit quaternion (w, x, y, z)."""

    t: np.ndarray
    q: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64).reshape(3)
        q = np.asarray(self.q, dtype=np.float64).reshape(4)
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(q))):
            raise InvalidPoseError("pose contains non-finite values")
        t.setflags(write=False)
        q.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "q", q)

    @staticmethod
    def identity() -> "Pose7":
        return Pose7(np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]))

    def as_vector(self) -> np.ndarray:
        """(tx, ty, tz, qw, qx, qy, qz) as a length-7 float64 array."""
        return np.concatenate([self.t, self.q])

    @staticmethod
    def from_vector(v) -> "Pose7":
        v = np.asarray(v, dtype=np.float64).reshape(7)
        return Pose7(v[:3], v[3:])

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.q)


@dataclass(frozen=True)
class SceneBounds:
    """Axis-aligned box containing all training camera positions."""

    center: np.ndarray
    extent: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center, dtype=np.float64).reshape(3)
        extent = np.asarray(self.extent, dtype=np.float64).reshape(3)
        if not np.all(extent > 0):
            raise InvalidBoundsError(f"extent must be positive per axis, got {extent}")
        center.setflags(write=False)
        extent.setflags(write=False)
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "extent", extent)

    @staticmethod
    def from_translations(ts, min_extent: float = 1e-3) -> "SceneBounds":
        """Tight box around the given positions, padded to min_extent per axis."""
        ts = np.asarray(ts, dtype=np.float64).reshape(-1, 3)
        lo, hi = ts.min(axis=0), ts.max(axis=0)
        center = (lo + hi) / 2.0
        extent = np.maximum((hi - lo) / 2.0, min_extent)
        return SceneBounds(center, extent)

    def contains(self, t, slack: float = 0.0) -> bool:
        t = np.asarray(t, dtype=np.float64).reshape(3)
        return bool(np.all(np.abs(t - self.center) <= self.extent + slack))


@dataclass(frozen=True)
class PoseDistance:
    translation_err: float  # meters
    rotation_err: float     # degrees, in [0, 180]


def canonicalize(pose: Pose7) -> Pose7:
    """Normalize the quaternion and resolve the sign so qw >= 0.

    The represented rotation is unchanged. Idempotent: applying it twice
    yields a bit-identical pose.
    """
    norm = float(np.linalg.norm(pose.q))
    if norm == 0.0:
        raise InvalidPoseError("zero-norm quaternion")
    q = pose.q
    if abs(norm - 1.0) > 1e-12:  # skip when already unit: keeps it idempotent bit-exact
        q = q / norm
    if q[0] < 0:
        q = -q
    if abs(float(np.linalg.norm(q)) - 1.0) > _QUAT_NORM_TOL:
        raise InvalidPoseError("quaternion could not be normalized")
    return Pose7(pose.t, q)


def encode_pose(pose: Pose7, bounds: SceneBounds) -> np.ndarray:
    """Map a pose to the 7-vector fed to the networks.

    Translation is normalized by the scene bounds to [-1, 1]; the unit
    quaternion passes through unchanged (it is already in [-1, 1]).
    Positions outside the bounds are clamped with a warning so that
    off-trajectory (extrapolated) viewpoints remain usable.
    """
    tn = (pose.t - bounds.center) / bounds.extent
    if np.any(np.abs(tn) > 1.0 + 1e-9):
        warnings.warn(
            f"pose translation {pose.t} outside scene bounds; clamping",
            stacklevel=2,
        )
    tn = np.clip(tn, -1.0, 1.0)
    return np.concatenate([tn, pose.q])


def decode_translation(encoded, bounds: SceneBounds) -> np.ndarray:
    """Inverse of the translation part of encode_pose."""
    enc = np.asarray(encoded, dtype=np.float64).reshape(-1)[:3]
    return enc * bounds.extent + bounds.center


def rotation_angle_deg(qa, qb) -> float:
    """Relative rotation angle between two unit quaternions, in degrees."""
    d = abs(float(np.dot(qa, qb)))
    if d >= 1.0 - 1e-12:  # same rotation up to float noise: acos would amplify it
        return 0.0
    return float(np.degrees(2.0 * np.arccos(d)))


def pose_distance(a: Pose7, b: Pose7) -> PoseDistance:
    """Euclidean translation gap plus quaternion geodesic angle."""
    terr = float(np.linalg.norm(a.t - b.t))
    return PoseDistance(translation_err=terr, rotation_err=rotation_angle_deg(a.q, b.q))


def interpolate(a: Pose7, b: Pose7, s: float) -> Pose7:
    """Linear translation / shorter-arc slerp rotation between two poses."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"interpolation parameter must be in [0, 1], got {s}")
    t = (1.0 - s) * a.t + s * b.t
    qa, qb = a.q.copy(), b.q.copy()
    d = float(np.dot(qa, qb))
    if d < 0.0:  # take the shorter arc
        qb = -qb
        d = -d
    if d > 1.0 - 1e-12:
        q = (1.0 - s) * qa + s * qb  # nearly parallel: lerp
    else:
        omega = np.arccos(min(1.0, d))
        so = np.sin(omega)
        q = (np.sin((1.0 - s) * omega) / so) * qa + (np.sin(s * omega) / so) * qb
    return canonicalize(Pose7(t, q))


def quat_to_matrix(q) -> np.ndarray:
    """Rotation matrix from a (w, x, y, z) quaternion (normalized first)."""
    q = np.asarray(q, dtype=np.float64).reshape(4)
    n = float(np.linalg.norm(q))
    if n == 0.0:
        raise InvalidPoseError("zero-norm quaternion")
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R) -> np.ndarray:
    """(w, x, y, z) quaternion from a rotation matrix, w >= 0."""
    R = np.asarray(R, dtype=np.float64).reshape(3, 3)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] > R[2, 2]:
        s = np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    q = q / np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


def rotate_vector(q, v) -> np.ndarray:
    """Rotate a 3-vector by a (w, x, y, z) quaternion."""
    return quat_to_matrix(q) @ np.asarray(v, dtype=np.float64).reshape(3)


def look_at(eye, target, up=(0.0, 0.0, 1.0)) -> Pose7:
    """Pose at ``eye`` with the optical axis through ``target``.

    ``up`` is the world up direction; the image up maps to it (camera y
    points down). Degenerate when the view direction is parallel to up.
    """
    eye = np.asarray(eye, dtype=np.float64).reshape(3)
    target = np.asarray(target, dtype=np.float64).reshape(3)
    up = np.asarray(up, dtype=np.float64).reshape(3)
    fwd = target - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise InvalidPoseError("look_at target coincides with eye")
    fwd = fwd / n
    right = np.cross(fwd, up)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        raise InvalidPoseError("view direction parallel to up vector")
    right = right / rn
    down = np.cross(fwd, right)
    R = np.stack([right, down, fwd], axis=1)  # columns: camera x, y, z in world
    return canonicalize(Pose7(eye, matrix_to_quat(R)))
