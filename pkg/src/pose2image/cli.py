"""Command-line entry points for the full workflow.

Exit codes: 0 success, 1 usage error, 2 data/config error. Failures print a
single machine-readable JSON line on stderr.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from .data import Intrinsics, SplitPlan, load_dataset, make_split
from .errors import P2IError
from .losses import LossWeights
from .metrics import benchmark_fps, evaluate_split
from .networks import NetworkConfig
from .oracle import OracleScene, generate_dataset, make_trajectory
from .synthesis import SynthesisContext, encode_png_depth16, encode_png_rgb, synthesize
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
from .validation import check_pose_vector

CONFIG_ENV_VAR = "P2I_CONFIG"


def _load_config_file(path: str | None, resolution: int) -> tuple[NetworkConfig, TrainConfig]:
    """Assemble configs from an optional JSON file ({"network": {...},
    "train": {...}}); anything unspecified falls back to resolution-scaled
    defaults."""
    raw = {}
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or None
    if path:
        raw = json.loads(Path(path).read_text())
    net_over = dict(raw.get("network", {}))
    net_over.pop("resolution", None)  # the dataset dictates resolution
    net_cfg = NetworkConfig.for_resolution(resolution, **{
        k: tuple(v) if k in ("g_channels", "d_channels") else v for k, v in net_over.items()
    })
    tr = dict(raw.get("train", {}))
    optim = OptimConfig(**tr.pop("optim", {}))
    weights = LossWeights(**tr.pop("weights", {}))
    ablation = AblationFlags(**tr.pop("ablation", {}))
    train_cfg = TrainConfig(optim=optim, weights=weights, ablation=ablation, **tr)
    return net_cfg, train_cfg


@click.group()
def cli():
    """Pose-to-image view synthesis tools."""


@cli.command("oracle-gen")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--resolution", default=64, show_default=True)
@click.option("--frames", default=240, show_default=True)
@click.option("--trajectory", default="circle", type=click.Choice(["circle", "arc", "line"]), show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--radii", default="1.2", show_default=True,
              help="comma-separated circle/arc radii; one sequence per radius")
def oracle_gen(out_dir, resolution, frames, trajectory, seed, radii):
    """Render a synthetic box-room dataset to the native layout."""
    scene = OracleScene(seed=seed)
    K = Intrinsics.square(resolution)
    trajectories = []
    for r in (float(x) for x in radii.split(",")):
        if trajectory == "circle":
            traj = make_trajectory("circle", frames, scene, radius=r, target=(0, 0, 0))
        elif trajectory == "arc":
            traj = make_trajectory(
                "arc", frames, scene, radius=r, theta_start=0.0, theta_end=np.pi, target=(0, 0, 0)
            )
        else:
            traj = make_trajectory(
                "line", frames, scene, start=(-r, -r, 0), end=(r, r, 0), target=(0, 0, 1.0)
            )
        trajectories.append(traj)
    ds = generate_dataset(scene, trajectories, K, out_dir)
    n = sum(len(s) for s in ds.sequences)
    click.echo(f"wrote {n} frames in {len(ds.sequences)} sequence(s) to {out_dir}")


@cli.command("split")
@click.option("--data", "data_dir", required=True, type=click.Path())
@click.option("--setting", required=True, type=click.Choice(["a", "b", "c"]))
@click.option("--missing", "missing_n", default=1, show_default=True, help="N for setting a")
@click.option("--test-seqs", default="", help="comma-separated sequence ids for settings b/c")
@click.option("--out", "out_file", required=True, type=click.Path())
@click.option("--format", "fmt", default="cp2v2", type=click.Choice(["cp2v2", "sevenscenes"]))
def split_cmd(data_dir, setting, missing_n, test_seqs, out_file, fmt):
    """Write a train/test SplitPlan JSON for one experiment setting."""
    ds = load_dataset(data_dir, format=fmt)
    seqs = [int(s) for s in test_seqs.split(",") if s.strip() != ""]
    plan = make_split(ds, setting, N=missing_n, test_seqs=seqs or None)
    plan.save(out_file)
    click.echo(f"split {setting}: {len(plan.train_ids)} train / {len(plan.test_ids)} test -> {out_file}")


@cli.command("train")
@click.option("--data", "data_dir", required=True, type=click.Path())
@click.option("--split", "split_file", required=True, type=click.Path())
@click.option("--config", "config_file", default=None, type=click.Path(),
              help=f"JSON config; defaults to ${CONFIG_ENV_VAR} if set")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--phase", default="both", type=click.Choice(["1", "2", "both"]), show_default=True)
@click.option("--format", "fmt", default="cp2v2", type=click.Choice(["cp2v2", "sevenscenes"]))
def train_cmd(data_dir, split_file, config_file, out_dir, phase, fmt):
    """Run the two-phase training loop and write checkpoint + report."""
    ds = load_dataset(data_dir, format=fmt)
    plan = SplitPlan.load(split_file)
    net_cfg, train_cfg = _load_config_file(config_file, ds.resolution[0])
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ckpt_dir = out / "checkpoint"
    ctx = SynthesisContext(bounds=ds.bounds, depth_max_m=ds.depth_max_m)

    reports = []
    if phase in ("1", "both"):
        bundle = new_bundle(net_cfg, train_cfg)
        reports.append(train_phase1(bundle, ds, plan, train_cfg))
    else:
        bundle = load_checkpoint(ckpt_dir).bundle
    if phase in ("2", "both"):
        reports.append(train_phase2(bundle, ds, plan, train_cfg))
    ckpt_id = save_checkpoint(bundle, ckpt_dir, ctx)

    report_path = out / "train_report.jsonl"
    with open(report_path, "w") as fh:
        for rep in reports:
            for rec in rep.records:
                fh.write(json.dumps({"phase": rep.phase, **rec}) + "\n")
    click.echo(f"checkpoint {ckpt_id} -> {ckpt_dir}; report -> {report_path}")


@cli.command("eval")
@click.option("--data", "data_dir", required=True, type=click.Path())
@click.option("--split", "split_file", required=True, type=click.Path())
@click.option("--ckpt", "ckpt_dir", required=True, type=click.Path())
@click.option("--out", "out_file", required=True, type=click.Path())
@click.option("--format", "fmt", default="cp2v2", type=click.Choice(["cp2v2", "sevenscenes"]))
def eval_cmd(data_dir, split_file, ckpt_dir, out_file, fmt):
    """Evaluate a checkpoint on a split; writes a JSON MetricsReport."""
    ds = load_dataset(data_dir, format=fmt)
    plan = SplitPlan.load(split_file)
    loaded = load_checkpoint(ckpt_dir)
    report = evaluate_split(loaded.bundle, ds, plan, checkpoint_id=loaded.checkpoint_id)
    Path(out_file).write_text(report.to_json())
    click.echo(report.format_table())


@cli.command("synth")
@click.option("--ckpt", "ckpt_dir", required=True, type=click.Path())
@click.option("--pose", "pose_str", required=True, help='"tx ty tz qw qx qy qz"')
@click.option("--out", "out_file", required=True, type=click.Path())
@click.option("--enhanced/--no-enhanced", default=True, show_default=True)
@click.option("--fmt", default="png_rgb", type=click.Choice(["png_rgb", "png_depth16"]), show_default=True)
def synth_cmd(ckpt_dir, pose_str, out_file, enhanced, fmt):
    """Render one pose through a trained checkpoint to a PNG file."""
    loaded = load_checkpoint(ckpt_dir)
    if loaded.ctx is None:
        raise P2IError("checkpoint carries no scene context; cannot synthesize")
    pose = check_pose_vector([float(x) for x in pose_str.split()])
    ((rgb, depth),) = synthesize(loaded.bundle, [pose], loaded.ctx, enhanced=enhanced)
    data = encode_png_rgb(rgb) if fmt == "png_rgb" else encode_png_depth16(depth)
    Path(out_file).write_bytes(data)
    click.echo(f"wrote {out_file}")


@cli.command("bench")
@click.option("--ckpt", "ckpt_dir", default=None, type=click.Path(),
              help="checkpoint to benchmark; omit to time an untrained probe model")
@click.option("--resolution", default=64, show_default=True)
@click.option("--n-warmup", default=5, show_default=True)
@click.option("--n-timed", default=30, show_default=True)
def bench_cmd(ckpt_dir, resolution, n_warmup, n_timed):
    """Measure end-to-end single-frame synthesis throughput."""
    if ckpt_dir is not None:
        loaded = load_checkpoint(ckpt_dir)
        bundle, ctx = loaded.bundle, loaded.ctx
        if ctx is None:
            raise P2IError("checkpoint carries no scene context; cannot synthesize")
    else:
        from .pose import SceneBounds

        cfg = NetworkConfig.for_resolution(resolution)
        train_cfg = TrainConfig()
        bundle = new_bundle(cfg, train_cfg)
        ctx = SynthesisContext(
            bounds=SceneBounds(np.zeros(3), np.ones(3)), depth_max_m=5.0
        )
    report = benchmark_fps(bundle, ctx, n_warmup=n_warmup, n_timed=n_timed)
    click.echo(json.dumps(report.to_dict(), indent=2))


@cli.command("serve")
@click.option("--ckpt", "ckpt_dir", required=True, type=click.Path())
@click.option("--port", default=8008, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
def serve_cmd(ckpt_dir, port, host):
    """Start the HTTP inference service over a frozen checkpoint."""
    import uvicorn

    from .service import create_app

    loaded = load_checkpoint(ckpt_dir)
    if loaded.ctx is None:
        raise P2IError("checkpoint carries no scene context; cannot serve")
    app = create_app(loaded.bundle, loaded.ctx, loaded.checkpoint_id)
    uvicorn.run(app, host=host, port=port, log_level="warning")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.UsageError as exc:
        print(json.dumps({"error": "usage", "detail": exc.format_message()}), file=sys.stderr)
        return 1
    except click.exceptions.Abort:
        return 1
    except click.exceptions.ClickException as exc:
        print(json.dumps({"error": "cli", "detail": exc.format_message()}), file=sys.stderr)
        return 1
    except P2IError as exc:
        print(
            json.dumps({"error": type(exc).__name__, "detail": str(exc)}), file=sys.stderr
        )
        return 2


if __name__ == "__main__":
    sys.exit(main())
