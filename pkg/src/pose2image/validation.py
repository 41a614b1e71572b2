"""Input validation helpers shared by the estimator and serving layers."""

from __future__ import annotations

import numpy as np

from .errors import InvalidPoseError
from .pose import Pose7


def check_pose_vector(v) -> Pose7:
    """Validate and canonicalize one raw (tx ty tz qw qx qy qz) pose."""
    from .pose import canonicalize

    arr = np.asarray(v, dtype=np.float64)
    if arr.shape != (7,):
        raise InvalidPoseError(f"pose must have exactly 7 components, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidPoseError("pose contains non-finite values")
    return canonicalize(Pose7.from_vector(arr))


def check_pose_array(X) -> list[Pose7]:
    """Validate an (N, 7) array or an iterable of Pose7 into canonical poses."""
    from .pose import canonicalize

    if isinstance(X, Pose7):
        return [canonicalize(X)]
    if hasattr(X, "__len__") and len(X) and isinstance(X[0], Pose7):
        return [canonicalize(p) for p in X]
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        return [check_pose_vector(arr)]
    if arr.ndim != 2 or arr.shape[1] != 7:
        raise InvalidPoseError(f"expected (N, 7) pose array, got shape {arr.shape}")
    return [check_pose_vector(row) for row in arr]


def check_is_fitted(estimator, attr: str = "bundle_"):
    if not hasattr(estimator, attr):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted yet; call fit() before predict()"
        )
