"""Analytic gradients vs central finite differences on tiny networks.

Every loss gradient that drives training is checked against a finite
difference oracle at 64-bit precision (vector relative error <= 1e-6 over
the sampled coordinates) and, as a coarser sanity bound, 32-bit at 1e-3.
The adaptive margin is frozen per check, matching how training treats it
(a schedule, not a learning signal).
"""

import numpy as np
import pytest
import torch

from pose2image.losses import (
    LossWeights,
    enet_loss,
    generator_total,
    hinge_projection_objective,
    pose_loss_fake,
    pose_loss_real,
)
from pose2image.networks import ModelBundle, NetworkConfig, projection_score

BATCH = 2
REL_TOL_64 = 1e-6
REL_TOL_32 = 1e-3


def tiny_bundle(dtype=torch.float64, seed=0) -> ModelBundle:
    cfg = NetworkConfig(
        resolution=8,
        latent_dim=16,
        g_channels=(16, 16),
        d_channels=(16,),
        head_hidden=8,
        enet_blocks=1,
        enet_width=8,
    )
    bundle = ModelBundle.create(cfg, seed=seed)
    torch.manual_seed(seed + 100)
    for p in bundle.enet.parameters():  # zero-init output conv would hide gradients
        torch.nn.init.normal_(p, std=0.1)
    for m in bundle.modules().values():
        m.to(dtype)
        m.train()
    return bundle


def fixed_inputs(dtype=torch.float64, seed=1):
    gen = torch.Generator().manual_seed(seed)
    y = (torch.rand(BATCH, 7, generator=gen, dtype=torch.float64) * 2 - 1).to(dtype)
    real = (torch.rand(BATCH, 4, 8, 8, generator=gen, dtype=torch.float64) * 1.6 - 0.8).to(dtype)
    return y, real


def fd_gradient_check(loss_fn, params, rel_tol, eps, coords_per_tensor=6, seed=3):
    """Compare autograd gradients with central differences on sampled
    coordinates of every parameter tensor; vector-level relative error."""
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    rng = np.random.default_rng(seed)
    analytic, numeric = [], []
    for p, g in zip(params, grads):
        g = torch.zeros_like(p) if g is None else g
        flat = p.detach().reshape(-1)
        n = flat.numel()
        take = min(coords_per_tensor, n)
        # largest-gradient coordinates dominate the norm; add random ones too
        order = torch.argsort(g.reshape(-1).abs(), descending=True)
        idx = set(order[: take // 2].tolist())
        while len(idx) < take:
            idx.add(int(rng.integers(0, n)))
        for i in sorted(idx):
            orig = flat[i].item()
            with torch.no_grad():
                flat[i] = orig + eps
            up = loss_fn().item()
            with torch.no_grad():
                flat[i] = orig - eps
            down = loss_fn().item()
            with torch.no_grad():
                flat[i] = orig
            numeric.append((up - down) / (2 * eps))
            analytic.append(g.reshape(-1)[i].item())
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    rel = np.linalg.norm(analytic - numeric) / denom
    assert rel <= rel_tol, f"gradient mismatch: vector relative error {rel:.3e}"


def d_side_losses(bundle, y, real, w):
    """Rebuild the discriminator-step losses from scratch (graph per call)."""
    with torch.no_grad():
        fake = bundle.generator(y)
    f_real = bundle.trunk(real)
    f_fake = bundle.trunk(fake)
    d_real = bundle.head_adv(f_real)
    d_fake = bundle.head_adv(f_fake)
    emb = bundle.head_embed(y)
    score_r = d_real + w.k1 * (f_real * emb).sum(dim=-1)
    score_f = d_fake + w.k1 * (f_fake * emb).sum(dim=-1)
    est_real = bundle.head_regress(f_real)
    est_fake = bundle.head_regress(f_fake)
    return score_r, score_f, est_real, est_fake


@pytest.fixture(scope="module")
def setup64():
    bundle = tiny_bundle(torch.float64)
    y, real = fixed_inputs(torch.float64)
    return bundle, y, real, LossWeights()


class TestGradients64Bit:
    EPS = 1e-6

    def test_neg_hinge_objective(self, setup64):
        bundle, y, real, w = setup64
        params = [p for m in [bundle.trunk, bundle.head_adv, bundle.head_embed] for p in m.parameters()]

        def loss_fn():
            score_r, score_f, _, _ = d_side_losses(bundle, y, real, w)
            return -hinge_projection_objective(score_r, score_f)

        fd_gradient_check(loss_fn, params, REL_TOL_64, self.EPS)

    def test_pose_loss_real(self, setup64):
        bundle, y, real, w = setup64
        params = [p for m in [bundle.trunk, bundle.head_regress] for p in m.parameters()]

        def loss_fn():
            f_real = bundle.trunk(real)
            return pose_loss_real(bundle.head_regress(f_real), y)

        fd_gradient_check(loss_fn, params, REL_TOL_64, self.EPS)

    def test_pose_loss_fake_frozen_margin(self, setup64):
        bundle, y, real, w = setup64
        params = [p for m in [bundle.trunk, bundle.head_regress] for p in m.parameters()]
        with torch.no_grad():
            _, _, est_real, est_fake = d_side_losses(bundle, y, real, w)
            gamma = torch.tensor(0.37, dtype=torch.float64)  # frozen schedule value

        def loss_fn():
            _, _, est_real, est_fake = d_side_losses(bundle, y, real, w)
            return pose_loss_fake(est_fake, est_real, gamma)

        fd_gradient_check(loss_fn, params, REL_TOL_64, self.EPS)

    def test_generator_loss(self, setup64):
        bundle, y, real, w = setup64
        params = list(bundle.generator.parameters())

        def loss_fn():
            fake = bundle.generator(y)
            f_fake = bundle.trunk(fake)
            score = projection_score(bundle.head_adv, bundle.head_embed, f_fake, y, w.k1)
            est = bundle.head_regress(f_fake)
            return generator_total(score, est, y)

        fd_gradient_check(loss_fn, params, REL_TOL_64, self.EPS)

    def test_enet_loss(self, setup64):
        bundle, y, real, w = setup64
        params = list(bundle.enet.parameters())
        with torch.no_grad():
            fake = bundle.generator(y)
        target = real[:, :3]

        def loss_fn():
            return enet_loss(bundle.enet(fake), target, w.k3)

        fd_gradient_check(loss_fn, params, REL_TOL_64, self.EPS)


def fd_direction_check(loss_fn, params, rel_tol, eps):
    """Central difference along the (unit) gradient direction: the directional
    derivative there equals ||g||, giving a strong signal against float32
    evaluation noise while still being a pure finite-difference oracle."""
    loss = loss_fn()
    grads = torch.autograd.grad(loss, params, allow_unused=True)
    grads = [torch.zeros_like(p) if g is None else g for p, g in zip(params, grads)]
    norm = torch.sqrt(sum((g * g).sum() for g in grads))
    assert norm > 0, "degenerate check: zero gradient"
    dirs = [g / norm for g in grads]
    analytic = float(sum((g * d).sum() for g, d in zip(grads, dirs)))
    with torch.no_grad():
        for p, d in zip(params, dirs):
            p.add_(eps * d)
    up = loss_fn().item()
    with torch.no_grad():
        for p, d in zip(params, dirs):
            p.add_(-2 * eps * d)
    down = loss_fn().item()
    with torch.no_grad():
        for p, d in zip(params, dirs):
            p.add_(eps * d)
    numeric = (up - down) / (2 * eps)
    rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-8)
    assert rel <= rel_tol, f"gradient mismatch: directional relative error {rel:.3e}"


class TestGradients32Bit:
    """Same contracts at float32 with the coarser 1e-3 bound; checked along
    the gradient direction where finite differences stay above float32 noise."""

    EPS = 1e-3

    def _bundle_inputs(self, seed):
        bundle = tiny_bundle(torch.float32, seed=seed)
        y, real = fixed_inputs(torch.float32, seed=seed + 2)
        return bundle, y, real, LossWeights()

    def test_neg_hinge_objective(self):
        bundle, y, real, w = self._bundle_inputs(5)
        params = [p for m in [bundle.trunk, bundle.head_adv, bundle.head_embed] for p in m.parameters()]

        def loss_fn():
            score_r, score_f, _, _ = d_side_losses(bundle, y, real, w)
            return -hinge_projection_objective(score_r, score_f)

        fd_direction_check(loss_fn, params, REL_TOL_32, self.EPS)

    def test_pose_loss_real(self):
        bundle, y, real, w = self._bundle_inputs(7)
        params = [p for m in [bundle.trunk, bundle.head_regress] for p in m.parameters()]

        def loss_fn():
            return pose_loss_real(bundle.head_regress(bundle.trunk(real)), y)

        fd_direction_check(loss_fn, params, REL_TOL_32, self.EPS)

    def test_pose_loss_fake_frozen_margin(self):
        bundle, y, real, w = self._bundle_inputs(9)
        params = [p for m in [bundle.trunk, bundle.head_regress] for p in m.parameters()]
        gamma = torch.tensor(0.25, dtype=torch.float32)

        def loss_fn():
            _, _, est_real, est_fake = d_side_losses(bundle, y, real, w)
            return pose_loss_fake(est_fake, est_real, gamma)

        fd_direction_check(loss_fn, params, REL_TOL_32, self.EPS)

    def test_generator_loss(self):
        bundle, y, real, w = self._bundle_inputs(2)
        params = list(bundle.generator.parameters())

        def loss_fn():
            fake = bundle.generator(y)
            f_fake = bundle.trunk(fake)
            score = projection_score(bundle.head_adv, bundle.head_embed, f_fake, y, w.k1)
            est = bundle.head_regress(f_fake)
            return generator_total(score, est, y)

        fd_direction_check(loss_fn, params, REL_TOL_32, self.EPS)

    def test_enet_loss(self):
        bundle, y, real, w = self._bundle_inputs(11)
        params = list(bundle.enet.parameters())
        with torch.no_grad():
            fake = bundle.generator(y)
        target = real[:, :3]

        def loss_fn():
            return enet_loss(bundle.enet(fake), target, w.k3)

        fd_direction_check(loss_fn, params, REL_TOL_32, self.EPS)
