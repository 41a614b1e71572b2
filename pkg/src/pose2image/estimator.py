"""Scikit-learn style facade over the full pipeline.

``PoseToImageSynthesizer`` is an estimator: ``fit`` runs both training
phases on a trajectory dataset, ``predict`` renders uint8 RGB images from
camera poses, ``score`` reports mean PSNR on held-out frames. Parameters
follow the sklearn convention (all settable via ``set_params``), so the
model drops into pipelines, grid search, and friends.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .data import TrajectoryDataset, make_split
from .losses import LossWeights
from .metrics import evaluate_split
from .networks import NetworkConfig, default_d_channels, default_g_channels
from .synthesis import SynthesisContext, synthesize
from .training import AblationFlags, OptimConfig, TrainConfig, new_bundle, train_phase1, train_phase2
from .validation import check_is_fitted, check_pose_array


class PoseToImageSynthesizer(BaseEstimator):
    """Deterministic pose -> image renderer for one fixed scene.

    Parameters mirror the underlying network/training configs at the level a
    caller usually touches; everything else keeps its default. The heavy
    lifting happens in :func:`pose2image.training.train_phase1` / ``2``.
    """

    def __init__(
        self,
        resolution: int = 64,
        latent_dim: int = 256,
        max_channels: int = 256,
        steps_phase1: int = 2000,
        steps_phase2: int = 500,
        batch_size: int = 16,
        lr_g: float = 1e-4,
        lr_d: float = 2e-4,
        k1: float = 1.0,
        k2: float = 1.0,
        k3: float = 0.1,
        use_attention: bool = True,
        use_depth: bool = True,
        use_enet: bool = True,
        seed: int = 0,
    ):
        self.resolution = resolution
        self.latent_dim = latent_dim
        self.max_channels = max_channels
        self.steps_phase1 = steps_phase1
        self.steps_phase2 = steps_phase2
        self.batch_size = batch_size
        self.lr_g = lr_g
        self.lr_d = lr_d
        self.k1 = k1
        self.k2 = k2
        self.k3 = k3
        self.use_attention = use_attention
        self.use_depth = use_depth
        self.use_enet = use_enet
        self.seed = seed

    # -- config assembly ----------------------------------------------------

    def _network_config(self) -> NetworkConfig:
        return NetworkConfig(
            resolution=self.resolution,
            latent_dim=self.latent_dim,
            g_channels=default_g_channels(self.resolution, c_max=self.max_channels),
            d_channels=default_d_channels(self.resolution, self.latent_dim),
            use_attention=self.use_attention,
            k1=self.k1,
            enet_blocks=4 if self.resolution <= 64 else 8,
        )

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            batch_size=self.batch_size,
            steps_phase1=self.steps_phase1,
            steps_phase2=self.steps_phase2,
            optim=OptimConfig(lr_g=self.lr_g, lr_d=self.lr_d),
            seed=self.seed,
            weights=LossWeights(k1=self.k1, k2=self.k2, k3=self.k3),
            ablation=AblationFlags(
                no_depth=not self.use_depth,
                no_enet=not self.use_enet,
            ),
        )

    # -- estimator API -------------------------------------------------------

    def fit(self, dataset: TrajectoryDataset, split=None):
        """Train both phases on the dataset (all frames unless a split is given)."""
        if split is None:
            split = make_split(dataset, "a", N=1) if self._has_long_seq(dataset) else None
        if split is None:
            # no held-out frames: train on everything
            from .data import SplitPlan

            split = SplitPlan(setting="c", N=0, train_ids=dataset.all_ids(), test_ids=[])
        cfg = self._train_config()
        bundle = new_bundle(self._network_config(), cfg)
        self.report_phase1_ = train_phase1(bundle, dataset, split, cfg)
        self.report_phase2_ = train_phase2(bundle, dataset, split, cfg)
        self.bundle_ = bundle
        self.split_ = split
        self.ctx_ = SynthesisContext(bounds=dataset.bounds, depth_max_m=dataset.depth_max_m)
        return self

    @staticmethod
    def _has_long_seq(dataset) -> bool:
        return any(len(s) >= 101 for s in dataset.sequences)

    def predict(self, X) -> np.ndarray:
        """Render poses (Pose7 list or (N, 7) array) to (N, H, W, 3) uint8 RGB."""
        check_is_fitted(self)
        poses = check_pose_array(X)
        outs = synthesize(self.bundle_, poses, self.ctx_, enhanced=self.use_enet)
        return np.stack([rgb for rgb, _ in outs])

    def predict_rgbd(self, X) -> list[tuple[np.ndarray, np.ndarray]]:
        """Like predict but returns (rgb uint8, depth uint16 mm) pairs."""
        check_is_fitted(self)
        return synthesize(self.bundle_, check_pose_array(X), self.ctx_, enhanced=self.use_enet)

    def score(self, dataset: TrajectoryDataset, split=None) -> float:
        """Mean PSNR (dB) over the split's held-out frames."""
        check_is_fitted(self)
        split = split or self.split_
        return evaluate_split(self.bundle_, dataset, split).psnr
