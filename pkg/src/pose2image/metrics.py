"""Image-quality metrics, split evaluation, and the throughput benchmark.

Metrics operate on 8-bit-quantized RGB rescaled to [0, 1] (how ground truth
is stored), with peak 1.0 for PSNR and the standard single-scale SSIM
(11x11 Gaussian window, sigma 1.5, C1 = (0.01 L)^2, C2 = (0.03 L)^2).
A perceptual scorer (LPIPS-style) can be registered at runtime; the library
itself ships no pretrained weights, and reports mark the metric unavailable
when no scorer is present.
"""

from __future__ import annotations

import json
import platform
import time
from dataclasses import dataclass, field

import numpy as np

from .data import SplitPlan, TrajectoryDataset
from .errors import MetricError
from .networks import ModelBundle
from .synthesis import SynthesisContext, synthesize

PSNR_CAP_DB = 100.0
_LUMA = np.array([0.299, 0.587, 0.114])

_lpips_scorer = None


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE), capped at 100 dB (identical images)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise MetricError(f"shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise MetricError("peak must be positive")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * np.log10(peak * peak / mse))


def _gaussian_kernel(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    k = np.exp(-(r * r) / (2.0 * sigma * sigma))
    k2 = np.outer(k, k)
    return k2 / k2.sum()


def _windowed_mean(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Valid-mode weighted window means via a sliding-window view."""
    kh, kw = kernel.shape
    windows = np.lib.stride_tricks.sliding_window_view(img, (kh, kw))
    return np.tensordot(windows, kernel, axes=([2, 3], [0, 1]))


def to_luminance(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 3 and img.shape[2] == 3:
        return img @ _LUMA
    if img.ndim == 2:
        return img
    raise MetricError(f"expected (H, W) or (H, W, 3) image, got {img.shape}")


def ssim(a: np.ndarray, b: np.ndarray, data_range: float = 1.0) -> float:
    """Single-scale SSIM on luminance with a Gaussian window."""
    ga, gb = to_luminance(a), to_luminance(b)
    if ga.shape != gb.shape:
        raise MetricError(f"shape mismatch: {ga.shape} vs {gb.shape}")
    win = 11
    if min(ga.shape) < win:
        raise MetricError(f"image {ga.shape} smaller than the {win}x{win} SSIM window")
    kernel = _gaussian_kernel(win, 1.5)
    c1 = (0.01 * data_range) ** 2
    c2 = (0.03 * data_range) ** 2

    mu_a = _windowed_mean(ga, kernel)
    mu_b = _windowed_mean(gb, kernel)
    var_a = _windowed_mean(ga * ga, kernel) - mu_a * mu_a
    var_b = _windowed_mean(gb * gb, kernel) - mu_b * mu_b
    cov = _windowed_mean(ga * gb, kernel) - mu_a * mu_b

    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def register_lpips_scorer(scorer):
    """Install a perceptual scorer: callable (rgb_a, rgb_b in [0,1]) -> float.
    Pass None to unregister."""
    global _lpips_scorer
    _lpips_scorer = scorer


def lpips_available() -> bool:
    return _lpips_scorer is not None


def lpips_adapter(a: np.ndarray, b: np.ndarray) -> float | None:
    """Delegate to the registered perceptual scorer; None when absent."""
    if _lpips_scorer is None:
        return None
    return float(_lpips_scorer(a, b))


@dataclass
class MetricsReport:
    split: str
    checkpoint_id: str
    per_frame: list[dict]
    psnr: float
    ssim: float
    lpips: float | None = None
    fps: float | None = None

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "checkpoint_id": self.checkpoint_id,
            "psnr": self.psnr,
            "ssim": self.ssim,
            "lpips": self.lpips if self.lpips is not None else "unavailable",
            "fps": self.fps,
            "per_frame": self.per_frame,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def format_table(self) -> str:
        lp = f"{self.lpips:.3f}" if self.lpips is not None else "unavailable"
        fps = f"{self.fps:.2f}" if self.fps is not None else "-"
        head = f"{'split':<14}{'PSNR↑':>10}{'SSIM↑':>10}{'LPIPS↓':>14}{'FPS↑':>10}"
        row = f"{self.split:<14}{self.psnr:>10.3f}{self.ssim:>10.3f}{lp:>14}{fps:>10}"
        return head + "\n" + row


def _quantized01(rgb_uint8: np.ndarray) -> np.ndarray:
    return rgb_uint8.astype(np.float64) / 255.0


def evaluate_frames(pred_rgb: list[np.ndarray], frames, split_name: str, checkpoint_id: str) -> MetricsReport:
    """Score predicted uint8 RGB against ground-truth frames."""
    per_frame = []
    for rgb, f in zip(pred_rgb, frames):
        a = _quantized01(rgb)
        b = _quantized01(f.rgb)
        rec = {
            "seq": f.seq_id,
            "frame": f.frame_id,
            "psnr": psnr(a, b),
            "ssim": ssim(a, b),
        }
        lp = lpips_adapter(a, b)
        if lp is not None:
            rec["lpips"] = lp
        per_frame.append(rec)
    lp_vals = [r["lpips"] for r in per_frame if "lpips" in r]
    return MetricsReport(
        split=split_name,
        checkpoint_id=checkpoint_id,
        per_frame=per_frame,
        psnr=float(np.mean([r["psnr"] for r in per_frame])),
        ssim=float(np.mean([r["ssim"] for r in per_frame])),
        lpips=float(np.mean(lp_vals)) if lp_vals else None,
    )


def evaluate_split(
    bundle: ModelBundle,
    dataset: TrajectoryDataset,
    split: SplitPlan,
    checkpoint_id: str = "",
    enhanced: bool | None = None,
) -> MetricsReport:
    """Synthesize every held-out frame and score it against ground truth."""
    if not split.test_ids:
        raise MetricError("split has no test frames")
    if dataset.resolution != (bundle.config.resolution, bundle.config.resolution):
        raise MetricError(
            f"model resolution {bundle.config.resolution} does not match "
            f"dataset resolution {dataset.resolution}"
        )
    if enhanced is None:
        enhanced = bundle.phase >= 2
    frames = [dataset.frame(s, f) for s, f in split.test_ids]
    ctx = SynthesisContext(bounds=dataset.bounds, depth_max_m=dataset.depth_max_m)
    outs = synthesize(bundle, [f.pose for f in frames], ctx, enhanced=enhanced)
    name = f"setting-{split.setting}" + (f" N={split.N}" if split.setting == "a" else "")
    return evaluate_frames([rgb for rgb, _ in outs], frames, name, checkpoint_id)


def mean_image_baseline(dataset: TrajectoryDataset, split: SplitPlan) -> MetricsReport:
    """Score the pixel-mean of all training images against each test frame.

    The weakest sensible predictor: any model that learned pose conditioning
    should clear it.
    """
    train = [dataset.frame(s, f) for s, f in split.train_ids]
    test = [dataset.frame(s, f) for s, f in split.test_ids]
    mean_img = np.mean([f.rgb.astype(np.float64) for f in train], axis=0)
    mean_u8 = np.clip(np.rint(mean_img), 0, 255).astype(np.uint8)
    return evaluate_frames([mean_u8] * len(test), test, "mean-image-baseline", "baseline")


@dataclass
class FpsReport:
    fps_mean: float
    fps_std: float
    ms_per_frame: float
    resolution: int
    batch: int
    n_timed: int
    device: str = field(default_factory=platform.processor)

    def to_dict(self) -> dict:
        return {
            "fps_mean": self.fps_mean,
            "fps_std": self.fps_std,
            "ms_per_frame": self.ms_per_frame,
            "resolution": self.resolution,
            "batch": self.batch,
            "n_timed": self.n_timed,
            "device": self.device or platform.machine(),
        }


def benchmark_fps(
    bundle: ModelBundle,
    ctx: SynthesisContext,
    n_warmup: int = 5,
    n_timed: int = 30,
) -> FpsReport:
    """Single-stream end-to-end throughput (pose encode -> generator ->
    enhancer -> 8-bit images) at batch 1."""
    if n_timed < 10:
        raise ValueError("n_timed must be >= 10")
    rng = np.random.default_rng(0)
    poses = []
    for _ in range(n_warmup + n_timed):
        t = ctx.bounds.center + (rng.uniform(-1, 1, 3) * ctx.bounds.extent)
        q = rng.normal(size=4)
        q /= np.linalg.norm(q)
        poses.append(np.concatenate([t, q]))
    for p in poses[:n_warmup]:
        synthesize(bundle, [p], ctx, enhanced=True)
    times = []
    for p in poses[n_warmup:]:
        t0 = time.perf_counter()
        synthesize(bundle, [p], ctx, enhanced=True)
        times.append(time.perf_counter() - t0)
    times = np.array(times)
    fps = 1.0 / times
    return FpsReport(
        fps_mean=float(fps.mean()),
        fps_std=float(fps.std()),
        ms_per_frame=float(times.mean() * 1e3),
        resolution=bundle.config.resolution,
        batch=1,
        n_timed=n_timed,
    )
