import pytest
import torch

from helpers import finite_diff_worst

from tavg.encoder import (SECOND_LAYERS, SEGMENT_LAYERS, EncoderConfig,
                          encode, init_encoder)


def closed_form_count(layer_specs, embedding_dim=128):
    total, c_in = 0, 1
    for out_c, k, _ in layer_specs:
        total += k * c_in * out_c + out_c
        c_in = out_c
    return total + c_in * embedding_dim + embedding_dim


class TestInit:
    def test_seed_repeat_identical(self):
        cfg = EncoderConfig.for_segment()
        a, b = init_encoder(cfg, 3), init_encoder(cfg, 3)
        for pa, pb in zip(a.parameters(), b.parameters()):
            assert torch.equal(pa, pb)

    def test_different_seeds_differ(self):
        cfg = EncoderConfig.for_segment()
        a, b = init_encoder(cfg, 3), init_encoder(cfg, 4)
        assert any(not torch.equal(pa, pb)
                   for pa, pb in zip(a.parameters(), b.parameters()))

    def test_default_parameter_count_matches_formula(self):
        for cfg in (EncoderConfig.for_segment(), EncoderConfig.for_second()):
            enc = init_encoder(cfg, 0)
            assert enc.parameter_count() == closed_form_count(cfg.layer_specs)
            assert cfg.parameter_count() == enc.parameter_count()

    def test_invalid_layer_specs_rejected(self):
        with pytest.raises(ValueError):
            EncoderConfig(1600, ((32, 15, 0),))
        with pytest.raises(ValueError):
            EncoderConfig(1600, ((32, -3, 4),))
        with pytest.raises(ValueError):
            EncoderConfig(1600, ())

    def test_embedding_dim_fixed(self):
        with pytest.raises(ValueError):
            EncoderConfig(1600, tuple(SEGMENT_LAYERS), embedding_dim=64)


class TestEncode:
    def test_output_length_128(self):
        enc = init_encoder(EncoderConfig.for_segment(), 1)
        segment = torch.rand(1600) * 2 - 1
        out = encode(segment, enc)
        assert out.shape == (128,)
        assert torch.all(torch.isfinite(out))

    def test_zero_weights_give_zero_embedding(self):
        enc = init_encoder(EncoderConfig.for_segment(), 1)
        with torch.no_grad():
            for p in enc.parameters():
                p.zero_()
        out = encode(torch.rand(1600) * 2 - 1, enc)
        assert torch.equal(out, torch.zeros(128))

    def test_wrong_input_length_rejected(self):
        enc = init_encoder(EncoderConfig.for_segment(), 1)
        with pytest.raises(ValueError, match="wrong input length"):
            encode(torch.rand(16000), enc)

    def test_second_config_accepts_16000(self):
        enc = init_encoder(EncoderConfig.for_second(), 1)
        assert encode(torch.rand(16000) * 2 - 1, enc).shape == (128,)
        assert len(EncoderConfig.for_second().layer_specs) \
            == len(SECOND_LAYERS)

    def test_batched_input(self):
        enc = init_encoder(EncoderConfig.for_segment(), 1)
        out = enc(torch.rand(4, 1600) * 2 - 1)
        assert out.shape == (4, 128)

    def test_deterministic_bitwise(self):
        enc = init_encoder(EncoderConfig.for_segment(), 2)
        segment = torch.rand(1600, generator=torch.Generator().manual_seed(5))
        assert torch.equal(encode(segment, enc), encode(segment, enc))


def test_gradients_match_finite_differences():
    cfg = EncoderConfig(input_length=64, layer_specs=((4, 7, 2), (8, 5, 2)))
    enc = init_encoder(cfg, 3, torch.float64)
    x = torch.rand(2, 64, dtype=torch.float64,
                   generator=torch.Generator().manual_seed(1)) * 2 - 1
    proj = torch.randn(2, 128, dtype=torch.float64,
                       generator=torch.Generator().manual_seed(9))
    worst, checked = finite_diff_worst(enc, lambda: (enc(x) * proj).sum(), 80)
    assert checked >= 50
    assert worst <= 1e-4
