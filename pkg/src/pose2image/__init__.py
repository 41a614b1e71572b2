"""pose2image: deterministic pose-conditioned view synthesis for a fixed
indoor scene, trained adversarially with dual pose-consistency constraints
and a separately trained enhancement network."""

from .data import (
    Intrinsics,
    RGBDFrame,
    SplitPlan,
    TrajectoryDataset,
    denormalize_frame,
    load_dataset,
    make_split,
    normalize_frame,
)
from .errors import P2IError
from .losses import LossWeights
from .metrics import MetricsReport, benchmark_fps, evaluate_split, mean_image_baseline, psnr, ssim
from .networks import ModelBundle, NetworkConfig
from .oracle import OracleScene, generate_dataset, make_trajectory, render_view
from .pose import Pose7, SceneBounds, canonicalize, encode_pose, interpolate, pose_distance
from .synthesis import SynthesisContext, synthesize
from .training import (
    AblationFlags,
    OptimConfig,
    TrainConfig,
    load_checkpoint,
    new_bundle,
    save_checkpoint,
    train_phase1,
    train_phase2,
)

__version__ = "0.1.0"

__all__ = [
    "AblationFlags",
    "Intrinsics",
    "LossWeights",
    "MetricsReport",
    "ModelBundle",
    "NetworkConfig",
    "OptimConfig",
    "OracleScene",
    "P2IError",
    "Pose7",
    "RGBDFrame",
    "SceneBounds",
    "SplitPlan",
    "SynthesisContext",
    "TrainConfig",
    "TrajectoryDataset",
    "benchmark_fps",
    "canonicalize",
    "denormalize_frame",
    "encode_pose",
    "evaluate_split",
    "generate_dataset",
    "interpolate",
    "load_checkpoint",
    "load_dataset",
    "make_split",
    "make_trajectory",
    "mean_image_baseline",
    "new_bundle",
    "normalize_frame",
    "pose_distance",
    "psnr",
    "render_view",
    "save_checkpoint",
    "ssim",
    "synthesize",
    "train_phase1",
    "train_phase2",
]
