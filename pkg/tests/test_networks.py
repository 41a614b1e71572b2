import numpy as np
import pytest
import torch

from pose2image.errors import ConfigError
from pose2image.networks import (
    ChannelAttention,
    ModelBundle,
    NetworkConfig,
    count_parameters,
    default_d_channels,
    default_g_channels,
    projection_score,
)


def tiny_cfg(**kw):
    base = dict(
        resolution=32,
        latent_dim=32,
        g_channels=(32, 32, 32, 16),
        d_channels=(16, 16, 32),
        head_hidden=16,
        enet_blocks=2,
        enet_width=8,
    )
    base.update(kw)
    return NetworkConfig(**base)


class TestNetworkConfig:
    def test_default_schedules(self):
        cfg = NetworkConfig()  # 256, full size
        assert cfg.latent_dim == 1024
        assert cfg.g_channels == (1024, 512, 256, 128, 64, 64, 64)
        assert cfg.d_channels[-1] == 1024
        assert cfg.num_stages == 6

    def test_depth_formula(self):
        # log2(64) - 2 = 4 downsampling blocks / upsampling stages
        assert NetworkConfig.for_resolution(64).num_stages == 4
        assert len(default_d_channels(64, 256)) == 4
        assert len(default_g_channels(64)) == 5

    def test_resolution_must_be_pow2(self):
        with pytest.raises(ConfigError):
            NetworkConfig(resolution=48)
        with pytest.raises(ConfigError):
            NetworkConfig(resolution=4)

    def test_latent_dim_floor(self):
        with pytest.raises(ConfigError):
            NetworkConfig(latent_dim=4)

    def test_d_channels_must_end_at_latent(self):
        with pytest.raises(ConfigError):
            tiny_cfg(d_channels=(16, 16, 16))

    def test_in_channels_restricted(self):
        with pytest.raises(ConfigError):
            tiny_cfg(in_channels=5)

    def test_fewer_channels_toggle(self):
        cfg = NetworkConfig().with_fewer_channels()
        assert cfg.g_channels == tuple(64 for _ in range(7))

    def test_dict_round_trip_and_hash(self):
        cfg = tiny_cfg()
        again = NetworkConfig.from_dict(cfg.to_dict())
        assert again == cfg
        assert again.hash() == cfg.hash()
        assert tiny_cfg(latent_dim=16, d_channels=(16, 16, 16)).hash() != cfg.hash()


class TestGenerator:
    def test_output_shape(self):
        b = ModelBundle.create(tiny_cfg(), seed=0)
        out = b.generator(torch.zeros(2, 7))
        assert out.shape == (2, 4, 32, 32)

    def test_rgb_only_shape(self):
        b = ModelBundle.create(tiny_cfg(in_channels=3), seed=0)
        assert b.generator(torch.zeros(1, 7)).shape == (1, 3, 32, 32)

    def test_identical_poses_identical_images(self):
        b = ModelBundle.create(tiny_cfg(), seed=0).eval_mode()
        y = torch.tensor([[0.1, -0.2, 0.3, 1.0, 0.0, 0.0, 0.0]] * 2)
        with torch.no_grad():
            out = b.generator(y)
        assert torch.equal(out[0], out[1])

    def test_seeded_init_reproducible_bit_exact(self):
        y = torch.linspace(-1, 1, 14).reshape(2, 7)
        outs = []
        for _ in range(2):
            b = ModelBundle.create(tiny_cfg(), seed=7).eval_mode()
            with torch.no_grad():
                outs.append(b.generator(y))
        assert torch.equal(outs[0], outs[1])

    def test_output_bounded(self):
        for seed in range(3):
            b = ModelBundle.create(tiny_cfg(), seed=seed).eval_mode()
            y = torch.randn(4, 7, generator=torch.Generator().manual_seed(seed)) * 3
            with torch.no_grad():
                out = b.generator(y)
            assert out.min() >= -1.0 and out.max() <= 1.0

    def test_non_finite_input_rejected(self):
        b = ModelBundle.create(tiny_cfg(), seed=0)
        bad = torch.full((1, 7), float("nan"))
        with pytest.raises(ValueError):
            b.generator(bad)


class TestDiscriminator:
    def test_feature_length_is_latent_dim(self):
        b = ModelBundle.create(tiny_cfg(), seed=0)
        f = b.trunk(torch.zeros(2, 4, 32, 32))
        assert f.shape == (2, 32)

    def test_default_config_latent_is_1024(self):
        cfg = NetworkConfig()
        assert cfg.latent_dim == 1024  # the published latent width

    def test_identical_inputs_identical_features(self):
        b = ModelBundle.create(tiny_cfg(), seed=1).eval_mode()
        x = torch.rand(1, 4, 32, 32)
        with torch.no_grad():
            assert torch.equal(b.trunk(x), b.trunk(x.clone()))

    def test_resolution_mismatch_rejected(self):
        b = ModelBundle.create(tiny_cfg(), seed=0)
        with pytest.raises(ConfigError):
            b.trunk(torch.zeros(1, 4, 16, 16))
        with pytest.raises(ConfigError):
            b.trunk(torch.zeros(1, 3, 32, 32))

    def test_attention_preserves_shape(self):
        att = ChannelAttention(16, reduction=4)
        x = torch.randn(2, 16, 8, 8)
        assert att(x).shape == x.shape

    def test_attention_toggle_strictly_reduces_params(self):
        with_att = ModelBundle.create(tiny_cfg(use_attention=True), seed=0)
        without = ModelBundle.create(tiny_cfg(use_attention=False), seed=0)
        assert without.parameter_count() < with_att.parameter_count()


class TestHeads:
    def test_zero_latent_zero_initialized_head(self):
        b = ModelBundle.create(tiny_cfg(), seed=0)
        torch.nn.init.zeros_(b.head_adv.fc.weight)
        torch.nn.init.zeros_(b.head_adv.fc.bias)
        assert b.head_adv(torch.zeros(3, 32)).abs().max().item() == 0.0

    def test_embed_output_length(self):
        b = ModelBundle.create(tiny_cfg(), seed=0)
        assert b.head_embed(torch.zeros(2, 7)).shape == (2, 32)

    def test_regress_output_length(self):
        b = ModelBundle.create(tiny_cfg(), seed=0)
        assert b.head_regress(torch.zeros(2, 32)).shape == (2, 7)


class TestProjectionScore:
    def test_zero_feature_kills_projection(self):
        md = lambda f: torch.full((f.shape[0],), 0.5, dtype=f.dtype)
        mp = lambda y: torch.ones(y.shape[0], 4, dtype=y.dtype) * 9.0
        f = torch.zeros(1, 4)
        y = torch.zeros(1, 7)
        assert projection_score(md, mp, f, y, k1=1.0).item() == pytest.approx(0.5)

    def test_k1_off_is_unconditional(self):
        md = lambda f: f.sum(dim=-1)
        mp = lambda y: torch.ones(y.shape[0], 4)
        f = torch.tensor([[1.0, 2.0, 3.0, 4.0]])
        assert projection_score(md, mp, f, torch.zeros(1, 7), k1=0.0).item() == pytest.approx(10.0)

    def test_dot_product_arithmetic(self):
        # f = (1, 0, ...), M_p(y) = (2, 0, ...), M_d(f) = 0.5, k1 = 1 -> 2.5
        md = lambda f: torch.full((f.shape[0],), 0.5, dtype=f.dtype)
        emb = torch.zeros(1, 8)
        emb[0, 0] = 2.0
        mp = lambda y: emb
        f = torch.zeros(1, 8)
        f[0, 0] = 1.0
        assert projection_score(md, mp, f, torch.zeros(1, 7), k1=1.0).item() == pytest.approx(2.5)

    def test_normalized_variant_is_cosine(self):
        md = lambda f: torch.zeros(f.shape[0], dtype=f.dtype)
        emb = torch.tensor([[0.0, 5.0]])
        mp = lambda y: emb
        f = torch.tensor([[3.0, 4.0]])
        score = projection_score(md, mp, f, torch.zeros(1, 7), k1=1.0, normalized=True)
        assert score.item() == pytest.approx(0.8)  # cos angle between (3,4) and (0,1)


class TestENet:
    def test_zero_initialized_residual_is_identity_on_rgb(self):
        b = ModelBundle.create(tiny_cfg(), seed=0).eval_mode()
        x = torch.rand(2, 4, 32, 32) * 2 - 1
        with torch.no_grad():
            out = b.enet(x)
        assert out.shape == (2, 3, 32, 32)
        assert torch.equal(out, x[:, :3])

    def test_seeded_double_run_bit_identical(self):
        x = torch.rand(1, 4, 32, 32, generator=torch.Generator().manual_seed(3))
        outs = []
        for _ in range(2):
            b = ModelBundle.create(tiny_cfg(), seed=5).eval_mode()
            torch.manual_seed(11)  # give the residual path non-zero weights
            for p in b.enet.parameters():
                torch.nn.init.normal_(p, std=0.05)
            with torch.no_grad():
                outs.append(b.enet(x))
        assert torch.equal(outs[0], outs[1])

    def test_output_bounded(self):
        b = ModelBundle.create(tiny_cfg(), seed=0)
        torch.manual_seed(0)
        for p in b.enet.parameters():
            torch.nn.init.normal_(p, std=0.5)
        b.eval_mode()
        with torch.no_grad():
            out = b.enet(torch.rand(1, 4, 32, 32) * 2 - 1)
        assert out.min() >= -1.0 and out.max() <= 1.0


class TestBundle:
    def test_parameter_hash_tracks_changes(self):
        b = ModelBundle.create(tiny_cfg(), seed=0)
        h0 = b.parameter_hash(["generator"])
        assert h0 == b.parameter_hash(["generator"])
        with torch.no_grad():
            next(b.generator.parameters()).add_(1.0)
        assert b.parameter_hash(["generator"]) != h0

    def test_count_parameters_consistent(self):
        b = ModelBundle.create(tiny_cfg(), seed=0)
        assert b.parameter_count() == sum(
            count_parameters(m) for m in b.modules().values()
        )
