"""Diagnostic sweep: fit quality on the training set, eval-mode drift, and
held-out PSNR for candidate generator configs. Not part of the package."""

import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import torch

from pose2image import (
    Intrinsics,
    NetworkConfig,
    OracleScene,
    TrainConfig,
    evaluate_split,
    generate_dataset,
    make_split,
    make_trajectory,
    mean_image_baseline,
    new_bundle,
    train_phase1,
    train_phase2,
)
from pose2image.data import normalize_frame
from pose2image.metrics import psnr
from pose2image.synthesis import SynthesisContext, synthesize
from pose2image.training import OptimConfig

STEPS = int(sys.argv[1]) if len(sys.argv) > 1 else 1200
NORM = sys.argv[2] if len(sys.argv) > 2 else "group"
CHECKER = float(sys.argv[3]) if len(sys.argv) > 3 else 1.0
LRG = float(sys.argv[4]) if len(sys.argv) > 4 else 1e-4

scene = OracleScene(checker_size=CHECKER, seed=7)
K = Intrinsics.square(64)
circle = make_trajectory("circle", 240, scene, radius=1.2, target=(0, 0, 0))
root = Path(tempfile.mkdtemp(prefix="probe_"))
ds = generate_dataset(scene, [circle], K, root / "d")
split = make_split(ds, "a", N=1)
base = mean_image_baseline(ds, split)
print(f"cfg: steps={STEPS} norm={NORM} checker={CHECKER} lr_g={LRG}; baseline psnr={base.psnr:.2f} ssim={base.ssim:.3f}", flush=True)

net = NetworkConfig(
    resolution=64, latent_dim=256,
    g_channels=(256, 128, 64, 64, 64), d_channels=(32, 64, 128, 256),
    enet_blocks=4, enet_width=32, g_norm=NORM,
)
cfg = TrainConfig(batch_size=16, steps_phase1=STEPS, steps_phase2=400,
                  optim=OptimConfig(lr_g=LRG), seed=0, log_every=50, eval_every=200)
bundle = new_bundle(net, cfg)
t0 = time.time()
rep1 = train_phase1(bundle, ds, split, cfg)

# fit quality on 16 training frames, train-mode vs eval-mode generator
train_frames = [ds.frame(s, f) for s, f in split.train_ids[:16]]
ctx = SynthesisContext(bounds=ds.bounds, depth_max_m=ds.depth_max_m)
outs_eval = synthesize(bundle, [f.pose for f in train_frames], ctx, enhanced=False)
fit_eval = np.mean([psnr(r.astype(float) / 255, f.rgb.astype(float) / 255)
                    for (r, _), f in zip(outs_eval, train_frames)])
from pose2image.pose import encode_pose
enc = torch.from_numpy(np.stack([encode_pose(f.pose, ds.bounds) for f in train_frames]).astype(np.float32))
bundle.generator.train()
with torch.no_grad():
    img_train = bundle.generator(enc)
bundle.generator.eval()
tgt = torch.from_numpy(np.stack([normalize_frame(f, ds.depth_max_m) for f in train_frames]))
fit_train = np.mean([
    psnr(((img_train[i, :3].numpy() + 1) / 2), ((tgt[i, :3].numpy() + 1) / 2))
    for i in range(len(train_frames))
])
print(f"train-frame fit: eval-mode G psnr={fit_eval:.2f}, train-mode G psnr={fit_train:.2f}", flush=True)

rep2 = train_phase2(bundle, ds, split, cfg)
m = evaluate_split(bundle, ds, split)
print(f"RESULT: held-out psnr={m.psnr:.2f} ssim={m.ssim:.3f} (baseline {base.psnr:.2f}/{base.ssim:.3f}) margin={m.psnr-base.psnr:+.2f}", flush=True)
for r in rep1.records:
    if "eval_psnr" in r:
        print(f"  step {r['step']}: eval_psnr={r['eval_psnr']:.2f} diff={r['diff']:.3f} gamma={r['gamma']:.4f} l_pro={r['l_pro']:.2f}", flush=True)
diffs = rep1.series("diff"); k = max(1, len(diffs)//10)
print(f"DIFF first={np.mean(diffs[:k]):.3f} last={np.mean(diffs[-k:]):.3f}; total {time.time()-t0:.0f}s", flush=True)

# dump a few samples for eyeballing
outdir = Path("/tmp/probe_samples"); outdir.mkdir(exist_ok=True)
from PIL import Image
test_frames = [ds.frame(s, f) for s, f in split.test_ids]
outs = synthesize(bundle, [f.pose for f in test_frames], ctx, enhanced=True)
for (rgb, _), f in zip(outs, test_frames):
    Image.fromarray(np.concatenate([f.rgb, rgb], axis=1)).save(outdir / f"{NORM}_{CHECKER}_{f.frame_id}.png")
print("samples in", outdir, flush=True)
