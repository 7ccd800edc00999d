import math

import pytest
import torch
from torch import nn

from helpers import finite_diff_worst

from tavg.discriminator import (DiscriminatorConfig, discriminate,
                                init_discriminator)

TINY = DiscriminatorConfig(in_size=16, base_channels=4)


def frame_batch(config, batch=2, dtype=torch.float32, seed=0):
    g = torch.Generator().manual_seed(seed)
    frames = torch.rand(batch, config.frames, 3, config.in_size,
                        config.in_size, generator=g, dtype=dtype) * 2 - 1
    y = torch.randn(batch, config.embedding_dim, generator=g, dtype=dtype)
    return frames, y


def closed_form_count(cfg: DiscriminatorConfig) -> int:
    n_blocks = int(math.log2(cfg.in_size // 4))
    total, c_in = 0, 3
    for i in range(n_blocks):
        c_out = cfg.base_channels * 2 ** i
        total += 4 * 4 * c_in * c_out          # strided conv, no bias
        if i > 0:
            total += 2 * c_out                  # batch-norm scale + shift
        c_in = c_out
    k = cfg.gru_kernel
    total += 3 * k * k * cfg.gru_hidden * (c_in + cfg.gru_hidden)
    c_mid = cfg.base_channels * 2
    total += 3 * 3 * (cfg.gru_hidden + cfg.embedding_dim) * c_mid + c_mid
    total += c_mid + 1                          # affine head
    return total


class TestInit:
    def test_seed_repeat_identical(self):
        a, b = init_discriminator(TINY, 2), init_discriminator(TINY, 2)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_blocks_use_leaky_slope(self):
        disc = init_discriminator(TINY, 0)
        leakies = [m for block in disc.blocks for m in block
                   if isinstance(m, nn.LeakyReLU)]
        assert leakies and all(m.negative_slope == 0.2 for m in leakies)

    @pytest.mark.parametrize("cfg", [TINY,
                                     DiscriminatorConfig(in_size=32,
                                                         base_channels=8)])
    def test_parameter_count_closed_form(self, cfg):
        disc = init_discriminator(cfg, 1)
        assert disc.parameter_count() == closed_form_count(cfg)

    def test_first_block_has_no_batch_norm(self):
        disc = init_discriminator(DiscriminatorConfig(in_size=32,
                                                      base_channels=8), 0)
        assert not any(isinstance(m, nn.BatchNorm2d) for m in disc.blocks[0])
        assert any(isinstance(m, nn.BatchNorm2d) for m in disc.blocks[1])


class TestDiscriminate:
    def test_zero_weights_score_half(self):
        disc = init_discriminator(TINY, 3)
        with torch.no_grad():
            for p in disc.parameters():
                p.zero_()
        frames, y = frame_batch(TINY)
        p = discriminate(frames, y, disc)
        assert torch.equal(p, torch.full_like(p, 0.5))

    def test_frame_order_changes_score(self):
        disc = init_discriminator(TINY, 4, torch.float64)
        disc.eval()
        frames, y = frame_batch(TINY, batch=1, dtype=torch.float64)
        p_fwd = discriminate(frames, y, disc)
        p_rev = discriminate(frames.flip(1), y, disc)
        assert not torch.equal(p_fwd, p_rev)

    def test_scores_strictly_inside_unit_interval(self):
        disc = init_discriminator(TINY, 5)
        for seed in range(5):
            frames, y = frame_batch(TINY, seed=seed)
            p = discriminate(frames, y, disc)
            assert torch.all(p > 0) and torch.all(p < 1)

    def test_condition_changes_score(self):
        disc = init_discriminator(TINY, 6, torch.float64)
        disc.eval()
        frames, y = frame_batch(TINY, batch=1, dtype=torch.float64)
        assert not torch.equal(discriminate(frames, y, disc),
                               discriminate(frames, y + 0.5, disc))

    def test_wrong_frame_count_rejected(self):
        disc = init_discriminator(TINY, 7)
        frames, y = frame_batch(TINY)
        with pytest.raises(ValueError, match="frame count"):
            discriminate(frames[:, :2], y, disc)

    def test_wrong_resolution_rejected(self):
        disc = init_discriminator(TINY, 7)
        y = torch.randn(2, 128)
        with pytest.raises(ValueError, match="resolution"):
            discriminate(torch.rand(2, 3, 3, 8, 8), y, disc)

    def test_single_frame_config(self):
        cfg = DiscriminatorConfig(in_size=16, base_channels=4, frames=1)
        disc = init_discriminator(cfg, 8)
        frames, y = frame_batch(cfg)
        assert discriminate(frames, y, disc).shape == (2,)

    def test_unbatched_input(self):
        disc = init_discriminator(TINY, 9)
        frames, y = frame_batch(TINY, batch=1)
        with torch.no_grad():
            p = discriminate(frames.squeeze(0), y.squeeze(0), disc)
        assert p.dim() == 0 and 0 < float(p) < 1


def test_gradients_match_finite_differences():
    disc = init_discriminator(TINY, 6, torch.float64)
    disc.eval()
    frames, y = frame_batch(TINY, dtype=torch.float64, seed=2)
    worst, checked = finite_diff_worst(
        disc, lambda: disc(frames, y).sum(), 60)
    assert checked >= 50
    assert worst <= 1e-4
