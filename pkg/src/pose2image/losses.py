"""Training objectives: hinge adversarial loss with projection conditioning,
dual pose-consistency terms with an adaptive margin, and the enhancer's
pixel + edge loss.

Sign convention: the hinge objective is written as the quantity the
discriminator maximizes (it is always <= 0); trainers minimize its negation.
The adaptive margin gamma is a schedule, not a learning signal -- it is
detached from the graph before use.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

_NORM_EPS = 1e-8  # inside sqrt of image norms / edge magnitudes, keeps them differentiable


@dataclass(frozen=True)
class LossWeights:
    k1: float = 1.0   # projection (latent-space pose consistency) weight
    k2: float = 1.0   # world-space pose consistency weight
    k3: float = 0.1   # edge term weight in the enhancer loss

    def __post_init__(self):
        if self.k1 < 0 or self.k2 < 0 or self.k3 < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass
class DLossBreakdown:
    """Per-batch discriminator loss components (floats, for logging)."""

    l_pro: float
    l_pe_real: float
    l_pe_fake: float
    total: float
    diff: float
    gamma: float


def hinge_projection_objective(score_real, score_fake):
    """Hinge objective over conditional scores; maximized by the discriminator.

    mean(min(0, -1 + s_real)) + mean(min(0, -1 - s_fake)); always <= 0,
    saturating at 0 once real scores clear +1 and fake scores clear -1.
    """
    zero = torch.zeros((), dtype=score_real.dtype, device=score_real.device)
    return (
        torch.minimum(zero, -1.0 + score_real).mean()
        + torch.minimum(zero, -1.0 - score_fake).mean()
    )


def pose_loss_real(pose_est, y):
    """Mean Euclidean norm between poses regressed from real images and the
    ground-truth encoded poses."""
    return torch.linalg.vector_norm(pose_est - y, dim=-1).mean()


def compute_gamma(d_real, d_fake, pose_est_real):
    """Adaptive margin: batch-mean |logit gap| times the batch-mean norm of
    the real-image pose estimate. Detached -- no gradients flow through it."""
    diff = (d_real - d_fake).abs().mean()
    gamma = diff * torch.linalg.vector_norm(pose_est_real, dim=-1).mean()
    return gamma.detach()


def pose_loss_fake(pose_est_fake, pose_est_real, gamma):
    """Hinged gap between poses regressed from generated vs real images;
    discrepancies inside the margin gamma cost nothing."""
    if float(gamma) < 0:
        raise ValueError(f"margin must be non-negative, got {float(gamma)}")
    delta = torch.linalg.vector_norm(pose_est_fake - pose_est_real, dim=-1)
    return torch.relu(delta - gamma).mean()


def discriminator_total(
    score_real,
    score_fake,
    d_real,
    d_fake,
    pose_est_real,
    pose_est_fake,
    y,
    w: LossWeights,
    include_pose: bool = True,
):
    """Minimized discriminator loss: -L_pro + k2 * (pose terms).

    Returns (loss tensor, DLossBreakdown). ``include_pose=False`` masks the
    world-space consistency terms entirely (ablation), independent of k2.
    """
    l_pro = hinge_projection_objective(score_real, score_fake)
    if include_pose:
        gamma = compute_gamma(d_real, d_fake, pose_est_real)
        l_pe_real = pose_loss_real(pose_est_real, y)
        l_pe_fake = pose_loss_fake(pose_est_fake, pose_est_real, gamma)
        total = -l_pro + w.k2 * (l_pe_real + l_pe_fake)
    else:
        gamma = torch.zeros_like(l_pro)
        l_pe_real = torch.zeros_like(l_pro)
        l_pe_fake = torch.zeros_like(l_pro)
        total = -l_pro
    diff = (d_real - d_fake).abs().mean()
    breakdown = DLossBreakdown(
        l_pro=l_pro.detach().item(),
        l_pe_real=l_pe_real.detach().item(),
        l_pe_fake=l_pe_fake.detach().item(),
        total=total.detach().item(),
        diff=diff.detach().item(),
        gamma=gamma.detach().item(),
    )
    return total, breakdown


def generator_total(score_fake, pose_est_fake, y, include_pose: bool = True):
    """Generator loss: -mean(score) plus the closed-loop pose regression gap."""
    loss = -score_fake.mean()
    if include_pose:
        loss = loss + torch.linalg.vector_norm(pose_est_fake - y, dim=-1).mean()
    return loss


def roberts_edge(image):
    """Diagonal-difference edge magnitude, (..., H, W) -> (..., H-1, W-1).

    Gx = p(i,j) - p(i+1,j+1), Gy = p(i,j+1) - p(i+1,j),
    magnitude = sqrt(Gx^2 + Gy^2 + eps).
    """
    if image.shape[-1] < 2 or image.shape[-2] < 2:
        raise ValueError(f"image must be at least 2x2, got {tuple(image.shape)}")
    gx = image[..., :-1, :-1] - image[..., 1:, 1:]
    gy = image[..., :-1, 1:] - image[..., 1:, :-1]
    return torch.sqrt(gx * gx + gy * gy + _NORM_EPS)


def _sample_norm(x):
    """Per-sample L2 norm over all non-batch dims, eps-smoothed at zero."""
    sq = (x * x).flatten(start_dim=1).sum(dim=1)
    return torch.sqrt(sq + _NORM_EPS)


def enet_loss(out_rgb, target_rgb, k3: float):
    """Pixel L2 norm plus weighted Roberts-edge L2 norm, batch means."""
    if out_rgb.shape != target_rgb.shape:
        raise ValueError(f"shape mismatch: {tuple(out_rgb.shape)} vs {tuple(target_rgb.shape)}")
    pixel = _sample_norm(out_rgb - target_rgb).mean()
    edge = _sample_norm(roberts_edge(out_rgb) - roberts_edge(target_rgb)).mean()
    return pixel + k3 * edge
