"""Learnable components: generator, discriminator trunk + heads, enhancer.

The generator is noise-free: a 7-vector encoded camera pose is the only
input, expanded through a fully connected layer to a 4x4 feature map and
upsampled stage by stage to the target resolution, tanh-bounded to [-1, 1].

The discriminator trunk downsamples to 4x4 and global-sum-pools into a
latent feature vector; three small heads consume it (or the raw pose):
  * adversarial head: latent -> real/fake logit
  * pose embed head:  7-vector -> latent (projection conditioning)
  * pose regress head: latent -> 7-vector (world-space pose consistency)

The enhancer is a fixed-resolution residual CNN that refines the generator's
RGB channels; its final conv starts at zero so it is exactly the identity on
the RGB part until trained.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

import torch
import torch.nn as nn

from .errors import ConfigError


def _is_pow2(x: int) -> bool:
    return x >= 1 and (x & (x - 1)) == 0


def default_g_channels(resolution: int, c_max: int = 1024, c_min: int = 64) -> tuple[int, ...]:
    """Channel schedule from the 4x4 stage down to the final hidden stage:
    start at c_max, halve per upsample, floor at c_min."""
    n_up = int(resolution).bit_length() - 3  # log2(res) - 2
    chans = [c_max]
    for _ in range(n_up):
        chans.append(max(c_min, chans[-1] // 2))
    return tuple(chans)


def default_d_channels(resolution: int, latent_dim: int, c_min: int = 16) -> tuple[int, ...]:
    """Doubling schedule ending exactly at latent_dim after the last block."""
    n_blocks = int(resolution).bit_length() - 3
    chans = [latent_dim]
    for _ in range(n_blocks - 1):
        chans.append(max(c_min, chans[-1] // 2))
    return tuple(reversed(chans))


@dataclass(frozen=True)
class NetworkConfig:
    resolution: int = 256
    in_channels: int = 4
    latent_dim: int = 1024
    g_channels: tuple[int, ...] = ()   # empty = derive default schedule
    d_channels: tuple[int, ...] = ()
    use_attention: bool = True
    attention_reduction: int = 8
    k1: float = 1.0
    normalized_projection: bool = False  # cosine instead of raw dot product
    g_norm: str = "group"              # "group" (batch-independent) or "batch"
    pose_fourier: int = 4              # sin/cos octaves lifting the pose input (0 = raw)
    head_hidden: int = 128
    enet_blocks: int = 8
    enet_width: int = 32

    def __post_init__(self):
        if self.resolution < 8 or not _is_pow2(self.resolution):
            raise ConfigError(f"resolution must be a power of two >= 8, got {self.resolution}")
        if self.latent_dim < 8:
            raise ConfigError(f"latent_dim must be >= 8, got {self.latent_dim}")
        if self.in_channels not in (3, 4):
            raise ConfigError(f"in_channels must be 3 or 4, got {self.in_channels}")
        if not self.g_channels:
            object.__setattr__(self, "g_channels", default_g_channels(self.resolution))
        if not self.d_channels:
            object.__setattr__(self, "d_channels", default_d_channels(self.resolution, self.latent_dim))
        object.__setattr__(self, "g_channels", tuple(int(c) for c in self.g_channels))
        object.__setattr__(self, "d_channels", tuple(int(c) for c in self.d_channels))
        if len(self.g_channels) != self.num_stages + 1:
            raise ConfigError(
                f"g_channels needs {self.num_stages + 1} entries for resolution "
                f"{self.resolution}, got {len(self.g_channels)}"
            )
        if len(self.d_channels) != self.num_stages:
            raise ConfigError(
                f"d_channels needs {self.num_stages} entries for resolution "
                f"{self.resolution}, got {len(self.d_channels)}"
            )
        if self.d_channels[-1] != self.latent_dim:
            raise ConfigError(
                f"last discriminator block must emit latent_dim={self.latent_dim} channels, "
                f"got {self.d_channels[-1]}"
            )

    @property
    def num_stages(self) -> int:
        """Upsampling stages in G == downsampling blocks in D: log2(res) - 2."""
        return int(self.resolution).bit_length() - 3

    @staticmethod
    def for_resolution(resolution: int, **overrides) -> "NetworkConfig":
        """Default config with capacity scaled to the resolution: latent and
        peak channel width grow with image size, capped at 1024 (the full-size
        schedule at 256 and above)."""
        cap = min(1024, 4 * resolution)
        latent = int(overrides.pop("latent_dim", cap))
        base = dict(
            resolution=resolution,
            latent_dim=latent,
            g_channels=default_g_channels(resolution, c_max=cap),
            d_channels=default_d_channels(resolution, latent),
            enet_blocks=4 if resolution <= 64 else 8,
        )
        base.update(overrides)
        return NetworkConfig(**base)

    def with_fewer_channels(self) -> "NetworkConfig":
        """All generator hidden stages at 64 channels (ablation toggle)."""
        return replace(self, g_channels=tuple(64 for _ in self.g_channels))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["g_channels"] = list(self.g_channels)
        d["d_channels"] = list(self.d_channels)
        return d

    @staticmethod
    def from_dict(d: dict) -> "NetworkConfig":
        d = dict(d)
        d["g_channels"] = tuple(d.get("g_channels", ()))
        d["d_channels"] = tuple(d.get("d_channels", ()))
        return NetworkConfig(**d)

    def hash(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


class ChannelAttention(nn.Module):
    """Squeeze-excite gate: global average -> bottleneck -> sigmoid scale.
    Preserves the spatial shape of its input."""

    def __init__(self, channels: int, reduction: int = 8):
        super().__init__()
        hidden = max(1, channels // reduction)
        self.squeeze = nn.Linear(channels, hidden)
        self.excite = nn.Linear(hidden, channels)
        self.act = nn.ReLU()

    def forward(self, x):
        z = x.mean(dim=(2, 3))
        gate = torch.sigmoid(self.excite(self.act(self.squeeze(z))))
        return x * gate[:, :, None, None]


def _norm_layer(kind: str, channels: int) -> nn.Module:
    if kind == "batch":
        return nn.BatchNorm2d(channels)
    if kind == "group":
        return nn.GroupNorm(min(8, channels), channels)
    raise ConfigError(f"unknown normalization {kind!r}")


def fourier_lift(y, octaves: int):
    """Deterministic, parameter-free frequency lift of the encoded pose:
    [y, sin(2^k pi y), cos(2^k pi y) for k < octaves]. Identity at octaves=0.

    Without this the generator fits the high-frequency pose->texture mapping
    an order of magnitude slower (the usual coordinate-network failure mode).
    """
    if octaves == 0:
        return y
    feats = [y]
    for k in range(octaves):
        arg = (2.0**k) * torch.pi * y
        feats.append(torch.sin(arg))
        feats.append(torch.cos(arg))
    return torch.cat(feats, dim=-1)


class Generator(nn.Module):
    """Encoded 7-D pose -> in_channels x R x R image in [-1, 1]."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        c0 = cfg.g_channels[0]
        in_dim = 7 * (1 + 2 * cfg.pose_fourier)
        self.fc = nn.Linear(in_dim, c0 * 4 * 4)
        stages = []
        for c_in, c_out in zip(cfg.g_channels[:-1], cfg.g_channels[1:]):
            stages.append(
                nn.Sequential(
                    nn.Upsample(scale_factor=2, mode="nearest"),
                    nn.Conv2d(c_in, c_out, 3, padding=1),
                    _norm_layer(cfg.g_norm, c_out),
                    nn.ReLU(),
                )
            )
        self.stages = nn.ModuleList(stages)
        self.to_image = nn.Conv2d(cfg.g_channels[-1], cfg.in_channels, 3, padding=1)

    def forward(self, pose_enc):
        if not torch.isfinite(pose_enc).all():
            raise ValueError("non-finite pose encoding")
        h = fourier_lift(pose_enc, self.cfg.pose_fourier)
        h = self.fc(h).reshape(-1, self.cfg.g_channels[0], 4, 4)
        for stage in self.stages:
            h = stage(h)
        return torch.tanh(self.to_image(h))


class DiscriminatorTrunk(nn.Module):
    """Image -> latent feature via strided conv blocks and global sum pooling."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.cfg = cfg
        blocks = []
        c_in = cfg.in_channels
        for c_out in cfg.d_channels:
            layers = [nn.Conv2d(c_in, c_out, 3, stride=2, padding=1), nn.LeakyReLU(0.2)]
            if cfg.use_attention:
                layers.append(ChannelAttention(c_out, cfg.attention_reduction))
            blocks.append(nn.Sequential(*layers))
            c_in = c_out
        self.blocks = nn.ModuleList(blocks)

    def forward(self, image):
        if image.shape[-1] != self.cfg.resolution or image.shape[1] != self.cfg.in_channels:
            raise ConfigError(
                f"discriminator expects {self.cfg.in_channels}x{self.cfg.resolution}"
                f"x{self.cfg.resolution} input, got {tuple(image.shape[1:])}"
            )
        h = image
        for block in self.blocks:
            h = block(h)
        return h.sum(dim=(2, 3))  # (B, latent_dim)


class AdversarialHead(nn.Module):
    """Latent feature -> real/fake logit."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.fc = nn.Linear(cfg.latent_dim, 1)

    def forward(self, f):
        return self.fc(f).squeeze(-1)


class PoseEmbedHead(nn.Module):
    """Encoded pose -> latent-space embedding for projection conditioning."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(7, cfg.latent_dim),
            nn.LeakyReLU(0.2),
            nn.Linear(cfg.latent_dim, cfg.latent_dim),
        )

    def forward(self, y):
        return self.net(y)


class PoseRegressHead(nn.Module):
    """Latent feature -> estimated encoded pose (7-vector)."""

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(cfg.latent_dim, cfg.head_hidden),
            nn.LeakyReLU(0.2),
            nn.Linear(cfg.head_hidden, 7),
        )

    def forward(self, f):
        return self.net(f)


def projection_score(m_d, m_p, f, y, k1: float, normalized: bool = False):
    """Conditional score: adversarial logit plus weighted feature/pose-embedding
    inner product (optionally cosine-normalized)."""
    logit = m_d(f)
    emb = m_p(y)
    if normalized:
        f = nn.functional.normalize(f, dim=-1)
        emb = nn.functional.normalize(emb, dim=-1)
    return logit + k1 * (f * emb).sum(dim=-1)


class ENet(nn.Module):
    """Residual refiner: 4(or 3)-channel generator output -> 3-channel RGB.

    The last conv is zero-initialized, so an untrained ENet returns the RGB
    part of its input exactly; clamping keeps the output in [-1, 1].
    """

    def __init__(self, cfg: NetworkConfig):
        super().__init__()
        w = cfg.enet_width
        self.conv_in = nn.Conv2d(cfg.in_channels, w, 3, padding=1)
        self.blocks = nn.ModuleList(
            nn.Sequential(
                nn.Conv2d(w, w, 3, padding=1),
                nn.ReLU(),
                nn.Conv2d(w, w, 3, padding=1),
            )
            for _ in range(cfg.enet_blocks)
        )
        self.conv_out = nn.Conv2d(w, 3, 3, padding=1)
        nn.init.zeros_(self.conv_out.weight)
        nn.init.zeros_(self.conv_out.bias)

    def forward(self, x):
        h = torch.relu(self.conv_in(x))
        for block in self.blocks:
            h = h + block(h)
        residual = self.conv_out(h)
        return torch.clamp(x[:, :3] + residual, -1.0, 1.0)


@dataclass
class ModelBundle:
    """All learnable components plus their configuration and training state."""

    generator: Generator
    trunk: DiscriminatorTrunk
    head_adv: AdversarialHead
    head_embed: PoseEmbedHead
    head_regress: PoseRegressHead
    enet: ENet
    config: NetworkConfig
    phase: int = 1
    step: int = 0

    COMPONENTS = ("generator", "trunk", "head_adv", "head_embed", "head_regress", "enet")

    @staticmethod
    def create(config: NetworkConfig, seed: int = 0) -> "ModelBundle":
        """Construct all components with a reproducible parameter init."""
        torch.manual_seed(seed)
        return ModelBundle(
            generator=Generator(config),
            trunk=DiscriminatorTrunk(config),
            head_adv=AdversarialHead(config),
            head_embed=PoseEmbedHead(config),
            head_regress=PoseRegressHead(config),
            enet=ENet(config),
            config=config,
        )

    def modules(self) -> dict[str, nn.Module]:
        return {name: getattr(self, name) for name in self.COMPONENTS}

    def discriminator_modules(self) -> list[nn.Module]:
        return [self.trunk, self.head_adv, self.head_embed, self.head_regress]

    def eval_mode(self) -> "ModelBundle":
        for m in self.modules().values():
            m.eval()
        return self

    def train_mode(self) -> "ModelBundle":
        for m in self.modules().values():
            m.train()
        return self

    def parameter_count(self) -> int:
        return sum(p.numel() for m in self.modules().values() for p in m.parameters())

    def parameter_hash(self, names=None) -> str:
        """SHA-256 over the raw bytes of the selected components' parameters
        (learnable tensors only; batch-norm statistics are buffers)."""
        h = hashlib.sha256()
        for name in names or self.COMPONENTS:
            for key, p in sorted(getattr(self, name).named_parameters()):
                h.update(key.encode())
                h.update(p.detach().cpu().numpy().tobytes())
        return h.hexdigest()


def count_parameters(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
