import pytest
import torch

from helpers import finite_diff_worst

from tavg.convgru import ConvGru
from tavg.generator import (GeneratorConfig, generate, init_generator,
                            sample_noise)

TINY = dict(base_channels=8, out_size=16)


def inputs(config, batch=2, dtype=torch.float32, seed=0):
    g = torch.Generator().manual_seed(seed)
    z = torch.randn(batch, config.noise_dim, generator=g, dtype=dtype)
    y = torch.randn(batch, config.embedding_dim, generator=g, dtype=dtype)
    return z, y


class TestConfig:
    def test_out_size_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            GeneratorConfig(out_size=12)
        with pytest.raises(ValueError):
            GeneratorConfig(out_size=4)
        GeneratorConfig(out_size=8)  # tiny test configs are allowed

    def test_unknown_mode_rejected(self):
        with pytest.raises(ValueError):
            GeneratorConfig(mode="recurrent")

    def test_frames_per_sample(self):
        assert GeneratorConfig(mode="with_gru").frames_per_sample == 3
        assert GeneratorConfig(mode="no_gru").frames_per_sample == 3
        assert GeneratorConfig(mode="baseline").frames_per_sample == 1


class TestInit:
    def test_seed_repeat_identical(self):
        cfg = GeneratorConfig(mode="with_gru", **TINY)
        a, b = init_generator(cfg, 7), init_generator(cfg, 7)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_no_gru_head_emits_nine_channels(self):
        gen = init_generator(GeneratorConfig(mode="no_gru", **TINY), 0)
        assert gen.head.out_channels == 9

    def test_with_gru_head_is_three_channel_cell(self):
        gen = init_generator(GeneratorConfig(mode="with_gru", **TINY), 0)
        assert isinstance(gen.head, ConvGru)
        assert gen.head.config.c_h == 3

    def test_baseline_head_emits_three_channels(self):
        gen = init_generator(GeneratorConfig(mode="baseline", **TINY), 0)
        assert gen.head.out_channels == 3

    def test_blocks_use_non_leaky_rectifier_and_batch_norm(self):
        import torch.nn as nn
        gen = init_generator(GeneratorConfig(mode="with_gru", **TINY), 0)
        for block in gen.blocks:
            kinds = [type(m) for m in block]
            assert nn.ReLU in kinds and nn.LeakyReLU not in kinds
            assert nn.BatchNorm2d in kinds


class TestGenerate:
    def test_emits_three_frames_at_full_size(self):
        cfg = GeneratorConfig(mode="with_gru", base_channels=16, out_size=64)
        gen = init_generator(cfg, 1)
        z, y = inputs(cfg, batch=1)
        frames = generate(z, y, gen)
        assert frames.shape == (1, 3, 3, 64, 64)

    @pytest.mark.parametrize("mode", ["with_gru", "no_gru", "baseline"])
    def test_output_range(self, mode):
        cfg = GeneratorConfig(mode=mode, **TINY)
        gen = init_generator(cfg, 2)
        z, y = inputs(cfg)
        frames = generate(z, y, gen)
        assert torch.all(frames >= -1) and torch.all(frames <= 1)

    def test_zero_gru_head_gives_gray_frames(self):
        cfg = GeneratorConfig(mode="with_gru", **TINY)
        gen = init_generator(cfg, 3)
        with torch.no_grad():
            for p in gen.head.parameters():
                p.zero_()
        z, y = inputs(cfg)
        frames = generate(z, y, gen)
        assert torch.equal(frames, torch.zeros_like(frames))

    def test_inference_is_bitwise_deterministic(self):
        cfg = GeneratorConfig(mode="no_gru", **TINY)
        gen = init_generator(cfg, 4)
        z, y = inputs(cfg)
        assert torch.equal(generate(z, y, gen), generate(z, y, gen))

    def test_condition_path_is_wired(self):
        cfg = GeneratorConfig(mode="with_gru", **TINY)
        gen = init_generator(cfg, 5)
        z, y = inputs(cfg, batch=1)
        other = y + 0.5
        diff = (generate(z, y, gen) - generate(z, other, gen)).abs().max()
        assert float(diff) > 0

    def test_modes_share_output_shape(self):
        shapes = set()
        for mode in ("with_gru", "no_gru"):
            cfg = GeneratorConfig(mode=mode, **TINY)
            gen = init_generator(cfg, 6)
            z, y = inputs(cfg)
            shapes.add(tuple(generate(z, y, gen).shape))
        assert len(shapes) == 1

    def test_unbatched_inputs(self):
        cfg = GeneratorConfig(mode="with_gru", **TINY)
        gen = init_generator(cfg, 6)
        z = sample_noise(1, torch.Generator().manual_seed(0)).squeeze(0)
        y = torch.randn(128)
        assert generate(z, y, gen).shape == (3, 3, 16, 16)

    def test_shape_mismatch_rejected(self):
        cfg = GeneratorConfig(mode="with_gru", **TINY)
        gen = init_generator(cfg, 6)
        with pytest.raises(ValueError):
            gen(torch.randn(2, 99), torch.randn(2, 128))
        with pytest.raises(ValueError):
            gen(torch.randn(2, 100), torch.randn(2, 64))


class TestGradients:
    def test_no_dead_paths(self):
        cfg = GeneratorConfig(mode="with_gru", base_channels=4, out_size=8)
        gen = init_generator(cfg, 7, torch.float64)
        gen.eval()
        z, y = inputs(cfg, dtype=torch.float64, seed=3)
        z.requires_grad_(True)
        y.requires_grad_(True)
        loss = gen(z, y).mean()
        grads = torch.autograd.grad(loss, [z, y] + list(gen.parameters()))
        for g in grads:
            assert float(g.abs().sum()) > 0

    def test_matches_finite_differences(self):
        cfg = GeneratorConfig(mode="with_gru", base_channels=4, out_size=8)
        gen = init_generator(cfg, 5, torch.float64)
        gen.eval()
        z, y = inputs(cfg, dtype=torch.float64, seed=11)
        proj = torch.randn(2, 3, 3, 8, 8, dtype=torch.float64,
                           generator=torch.Generator().manual_seed(13))
        worst, checked = finite_diff_worst(
            gen, lambda: (gen(z, y) * proj).sum(), 60)
        assert checked >= 50
        assert worst <= 1e-4
