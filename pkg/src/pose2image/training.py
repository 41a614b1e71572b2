"""Two-phase training loop and checkpoint IO.

Phase 1 alternates discriminator and generator updates under the hinge +
dual-pose-consistency objectives; phase 2 freezes the generator and fits the
enhancer with the pixel + edge loss. Runs are reproducible: parameter init
and batch order derive from the configured seed and nothing else is random.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from .data import SplitPlan, TrajectoryDataset, normalize_frame
from .errors import CheckpointError, TrainingDiverged, TrainingStateError
from .losses import LossWeights, discriminator_total, enet_loss, generator_total
from .networks import ModelBundle, NetworkConfig, projection_score
from .pose import encode_pose
from .synthesis import SynthesisContext

CHECKPOINT_FORMAT_VERSION = 1


@dataclass(frozen=True)
class OptimConfig:
    lr_g: float = 1e-4
    lr_d: float = 2e-4
    lr_enet: float = 2e-4
    beta1: float = 0.0
    beta2: float = 0.9

    def __post_init__(self):
        if min(self.lr_g, self.lr_d, self.lr_enet) <= 0:
            raise ValueError("learning rates must be positive")


@dataclass(frozen=True)
class AblationFlags:
    no_depth: bool = False
    no_hd_match: bool = False      # drop projection conditioning (k1 = 0)
    no_ld_match: bool = False      # drop world-space pose losses
    no_attention: bool = False
    fewer_channels: bool = False   # all generator hidden stages at 64
    no_enet: bool = False          # skip phase 2; output = generator RGB


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    steps_phase1: int = 2000
    steps_phase2: int = 500
    d_steps_per_g: int = 1
    optim: OptimConfig = field(default_factory=OptimConfig)
    seed: int = 0
    weights: LossWeights = field(default_factory=LossWeights)
    ablation: AblationFlags = field(default_factory=AblationFlags)
    log_every: int = 25
    eval_every: int = 0            # 0 = no eval snapshots
    debug_check_freeze: bool = False

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.steps_phase1 < 0 or self.steps_phase2 < 0:
            raise ValueError("step counts must be >= 0")


@dataclass
class TrainReport:
    phase: int
    records: list[dict]
    wall_clock_s: float
    checkpoint_path: str | None = None

    def write_jsonl(self, path):
        with open(path, "w") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")

    def series(self, key: str) -> list[float]:
        return [r[key] for r in self.records if r.get(key) is not None]


def effective_network_config(base: NetworkConfig, ablation: AblationFlags) -> NetworkConfig:
    cfg = base
    if ablation.no_depth:
        cfg = replace(cfg, in_channels=3)
    if ablation.no_attention:
        cfg = replace(cfg, use_attention=False)
    if ablation.fewer_channels:
        cfg = cfg.with_fewer_channels()
    return cfg


def effective_weights(weights: LossWeights, ablation: AblationFlags) -> LossWeights:
    if ablation.no_hd_match:
        weights = replace(weights, k1=0.0)
    return weights


def new_bundle(net_cfg: NetworkConfig, train_cfg: TrainConfig) -> ModelBundle:
    """Create a bundle with ablation toggles applied and seeded parameters."""
    return ModelBundle.create(effective_network_config(net_cfg, train_cfg.ablation), train_cfg.seed)


class _TrainArrays:
    """Training tensors staged in memory: encoded poses + normalized frames."""

    def __init__(self, ds: TrajectoryDataset, ids, in_channels: int):
        frames = [ds.frame(s, f) for s, f in ids]
        self.ids = list(ids)
        poses = np.stack(
            [encode_pose(f.pose, ds.bounds) for f in frames]
        ).astype(np.float32)
        imgs = np.stack([normalize_frame(f, ds.depth_max_m) for f in frames])
        if in_channels == 3:
            imgs = imgs[:, :3]
        self.poses = torch.from_numpy(poses)
        self.images = torch.from_numpy(imgs)

    def __len__(self):
        return self.poses.shape[0]


def _inner(f, emb, normalized: bool):
    if normalized:
        f = torch.nn.functional.normalize(f, dim=-1)
        emb = torch.nn.functional.normalize(emb, dim=-1)
    return (f * emb).sum(dim=-1)


def _batch_stream(n: int, batch_size: int, rng: np.random.Generator):
    """Seeded epoch shuffles yielding index arrays of exactly batch_size."""
    while True:
        if n < batch_size:
            yield rng.choice(n, size=batch_size, replace=True)
            continue
        perm = rng.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            yield perm[start : start + batch_size]


def _check_finite(value: float, what: str, step: int, batch_ids, breakdown=None):
    if np.isfinite(value):
        return
    raise TrainingDiverged(
        f"non-finite {what} at step {step}",
        diagnostics={
            "step": step,
            "what": what,
            "batch_ids": [list(map(int, b)) for b in batch_ids],
            "breakdown": asdict(breakdown) if breakdown is not None else None,
        },
    )


def train_phase1(
    bundle: ModelBundle,
    dataset: TrajectoryDataset,
    split: SplitPlan,
    cfg: TrainConfig,
) -> TrainReport:
    """Adversarial phase: alternate discriminator (+ heads) and generator steps."""
    if not split.train_ids:
        raise TrainingStateError("split has no training frames")
    if bundle.phase != 1:
        raise TrainingStateError(f"bundle is in phase {bundle.phase}, expected 1")
    t0 = time.perf_counter()
    records: list[dict] = []
    if cfg.steps_phase1 == 0:
        return TrainReport(phase=1, records=records, wall_clock_s=0.0)

    w = effective_weights(cfg.weights, cfg.ablation)
    include_pose = not cfg.ablation.no_ld_match
    data = _TrainArrays(dataset, split.train_ids, bundle.config.in_channels)
    rng = np.random.default_rng(cfg.seed)
    batches = _batch_stream(len(data), cfg.batch_size, rng)

    g = bundle.generator
    d_modules = bundle.discriminator_modules()
    d_params = [p for m in d_modules for p in m.parameters()]
    opt_d = torch.optim.Adam(d_params, lr=cfg.optim.lr_d, betas=(cfg.optim.beta1, cfg.optim.beta2))
    opt_g = torch.optim.Adam(g.parameters(), lr=cfg.optim.lr_g, betas=(cfg.optim.beta1, cfg.optim.beta2))
    bundle.train_mode()

    for step in range(1, cfg.steps_phase1 + 1):
        # --- discriminator step(s): generator frozen ---
        last_breakdown = None
        d_batch_ids = []
        for _ in range(cfg.d_steps_per_g):
            idx = next(batches)
            d_batch_ids.append(idx)
            y = data.poses[idx]
            real = data.images[idx]
            with torch.no_grad():
                fake = g(y)
            if cfg.debug_check_freeze:
                g_hash_before = bundle.parameter_hash(["generator"])
            f_real = bundle.trunk(real)
            f_fake = bundle.trunk(fake)
            d_real = bundle.head_adv(f_real)
            d_fake = bundle.head_adv(f_fake)
            emb = bundle.head_embed(y)
            proj_r = d_real + w.k1 * _inner(f_real, emb, bundle.config.normalized_projection)
            proj_f = d_fake + w.k1 * _inner(f_fake, emb, bundle.config.normalized_projection)
            est_real = bundle.head_regress(f_real)
            est_fake = bundle.head_regress(f_fake)
            loss_d, breakdown = discriminator_total(
                proj_r, proj_f, d_real, d_fake, est_real, est_fake, y, w,
                include_pose=include_pose,
            )
            _check_finite(breakdown.total, "discriminator loss", step, d_batch_ids, breakdown)
            opt_d.zero_grad(set_to_none=True)
            opt_g.zero_grad(set_to_none=True)
            loss_d.backward()
            opt_d.step()
            last_breakdown = breakdown
            if cfg.debug_check_freeze:
                assert bundle.parameter_hash(["generator"]) == g_hash_before

        # --- generator step: discriminator and heads frozen ---
        idx = d_batch_ids[-1]
        y = data.poses[idx]
        if cfg.debug_check_freeze:
            d_hash_before = bundle.parameter_hash(
                ["trunk", "head_adv", "head_embed", "head_regress"]
            )
        fake = g(y)
        f_fake = bundle.trunk(fake)
        score_fake = projection_score(
            bundle.head_adv, bundle.head_embed, f_fake, y, w.k1,
            normalized=bundle.config.normalized_projection,
        )
        est_fake = bundle.head_regress(f_fake)
        loss_g = generator_total(score_fake, est_fake, y, include_pose=include_pose)
        _check_finite(loss_g.detach().item(), "generator loss", step, [idx], last_breakdown)
        opt_d.zero_grad(set_to_none=True)
        opt_g.zero_grad(set_to_none=True)
        loss_g.backward()
        opt_g.step()
        if cfg.debug_check_freeze:
            assert (
                bundle.parameter_hash(["trunk", "head_adv", "head_embed", "head_regress"])
                == d_hash_before
            )

        bundle.step = step
        if step % cfg.log_every == 0 or step == cfg.steps_phase1:
            rec = {
                "step": step,
                "l_pro": last_breakdown.l_pro,
                "l_pe_real": last_breakdown.l_pe_real,
                "l_pe_fake": last_breakdown.l_pe_fake,
                "gamma": last_breakdown.gamma,
                "diff": last_breakdown.diff,
                "l_g": loss_g.detach().item(),
                "l_enet": None,
                "wallclock_s": round(time.perf_counter() - t0, 3),
            }
            if cfg.eval_every and step % cfg.eval_every == 0 and split.test_ids:
                rec["eval_psnr"] = _eval_snapshot(bundle, dataset, split)
                bundle.train_mode()
            records.append(rec)

    return TrainReport(phase=1, records=records, wall_clock_s=time.perf_counter() - t0)


def train_phase2(
    bundle: ModelBundle,
    dataset: TrajectoryDataset,
    split: SplitPlan,
    cfg: TrainConfig,
) -> TrainReport:
    """Enhancement phase: generator frozen bit-exact, enhancer fits the
    pixel + edge loss against real RGB."""
    if bundle.phase != 1:
        raise TrainingStateError(f"bundle is in phase {bundle.phase}, expected completed phase 1")
    t0 = time.perf_counter()
    records: list[dict] = []
    if cfg.ablation.no_enet or cfg.steps_phase2 == 0:
        bundle.phase = 2
        return TrainReport(phase=2, records=records, wall_clock_s=0.0)

    data = _TrainArrays(dataset, split.train_ids, bundle.config.in_channels)
    rng = np.random.default_rng(cfg.seed + 1)
    batches = _batch_stream(len(data), cfg.batch_size, rng)

    g = bundle.generator
    g.eval()  # frozen: eval mode keeps buffers (batch-norm stats) untouched
    bundle.enet.train()
    opt = torch.optim.Adam(
        bundle.enet.parameters(), lr=cfg.optim.lr_enet, betas=(cfg.optim.beta1, cfg.optim.beta2)
    )

    for step in range(1, cfg.steps_phase2 + 1):
        idx = next(batches)
        y = data.poses[idx]
        target_rgb = data.images[idx][:, :3]
        with torch.no_grad():
            fake = g(y)
        out = bundle.enet(fake)
        loss = enet_loss(out, target_rgb, cfg.weights.k3)
        _check_finite(loss.detach().item(), "enet loss", step, [idx])
        opt.zero_grad(set_to_none=True)
        loss.backward()
        opt.step()
        if step % cfg.log_every == 0 or step == cfg.steps_phase2:
            records.append(
                {
                    "step": step,
                    "l_enet": loss.detach().item(),
                    "wallclock_s": round(time.perf_counter() - t0, 3),
                }
            )

    bundle.phase = 2
    return TrainReport(phase=2, records=records, wall_clock_s=time.perf_counter() - t0)


def _eval_snapshot(bundle, dataset, split, max_frames: int = 4) -> float:
    """Mean PSNR over a few held-out frames; cheap progress probe."""
    from .metrics import psnr
    from .synthesis import synthesize

    ids = split.test_ids[:max_frames]
    frames = [dataset.frame(s, f) for s, f in ids]
    ctx = SynthesisContext(bounds=dataset.bounds, depth_max_m=dataset.depth_max_m)
    outs = synthesize(bundle, [f.pose for f in frames], ctx, enhanced=bundle.phase >= 2)
    vals = [
        psnr(rgb.astype(np.float64) / 255.0, f.rgb.astype(np.float64) / 255.0)
        for (rgb, _), f in zip(outs, frames)
    ]
    return float(np.mean(vals))


# ---------------------------------------------------------------------------
# Checkpoints

def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def save_checkpoint(bundle: ModelBundle, path, ctx: SynthesisContext | None = None) -> str:
    """Write manifest.json plus one parameter blob per component.

    Returns the checkpoint id (stable hash of the manifest contents).
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    components = {}
    for name, module in bundle.modules().items():
        blob = path / f"{name}.pt"
        torch.save(module.state_dict(), blob)
        components[name] = {"file": blob.name, "sha256": _sha256_file(blob)}
    manifest = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "phase": bundle.phase,
        "step": bundle.step,
        "config": bundle.config.to_dict(),
        "config_hash": bundle.config.hash(),
        "components": components,
        "context": ctx.to_dict() if ctx is not None else None,
    }
    text = json.dumps(manifest, indent=2, sort_keys=True)
    manifest["checkpoint_id"] = hashlib.sha256(text.encode()).hexdigest()[:16]
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest["checkpoint_id"]


@dataclass
class LoadedCheckpoint:
    bundle: ModelBundle
    ctx: SynthesisContext | None
    checkpoint_id: str


def load_checkpoint(path, expected_config: NetworkConfig | None = None) -> LoadedCheckpoint:
    """Reload a checkpoint bit-exactly; refuses version, checksum, or config
    hash mismatches."""
    path = Path(path)
    manifest_path = path / "manifest.json"
    if not manifest_path.is_file():
        raise CheckpointError(f"missing manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {manifest.get('format_version')}"
        )
    config = NetworkConfig.from_dict(manifest["config"])
    if config.hash() != manifest["config_hash"]:
        raise CheckpointError("manifest config hash does not match its config")
    if expected_config is not None and expected_config.hash() != manifest["config_hash"]:
        raise CheckpointError("checkpoint config does not match the requested config")

    bundle = ModelBundle.create(config, seed=0)
    for name in ModelBundle.COMPONENTS:
        entry = manifest["components"][name]
        blob = path / entry["file"]
        if not blob.is_file():
            raise CheckpointError(f"missing parameter blob: {blob}")
        if _sha256_file(blob) != entry["sha256"]:
            raise CheckpointError(f"checksum mismatch for {blob}")
        getattr(bundle, name).load_state_dict(torch.load(blob, weights_only=True))
    bundle.phase = int(manifest["phase"])
    bundle.step = int(manifest["step"])
    ctx = SynthesisContext.from_dict(manifest["context"]) if manifest.get("context") else None
    return LoadedCheckpoint(bundle=bundle, ctx=ctx, checkpoint_id=manifest["checkpoint_id"])
