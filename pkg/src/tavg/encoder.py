"""Audio encoder: 1-D conv stack mapping a waveform segment to a 128-d condition vector."""

from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .inits import seeded_init

EMBEDDING_DIM = 128

# Five stride-4 layers cover a 0.1 s segment (1600 samples at 16 kHz);
# the 1 s variant appends one more stride-4 layer so 16000-sample inputs
# reach a comparable temporal extent before pooling.
SEGMENT_LAYERS = [(32, 15, 4), (64, 15, 4), (64, 15, 4), (128, 15, 4), (128, 15, 4)]
SECOND_LAYERS = SEGMENT_LAYERS + [(128, 15, 4)]


@dataclass(frozen=True)
class EncoderConfig:
    input_length: int = 1600
    layer_specs: tuple = tuple(SEGMENT_LAYERS)  # (out_channels, kernel, stride) triples
    embedding_dim: int = EMBEDDING_DIM
    leaky_slope: float = 0.2

    def __post_init__(self):
        if self.input_length <= 0:
            raise ValueError("input_length must be positive")
        if self.embedding_dim != EMBEDDING_DIM:
            raise ValueError(f"embedding_dim must be {EMBEDDING_DIM}")
        if not self.layer_specs:
            raise ValueError("layer_specs must not be empty")
        for spec in self.layer_specs:
            out_c, k, s = spec
            if out_c <= 0 or k <= 0 or s <= 0:
                raise ValueError(f"invalid layer spec {spec!r}")

    @staticmethod
    def for_segment() -> "EncoderConfig":
        return EncoderConfig(1600, tuple(SEGMENT_LAYERS))

    @staticmethod
    def for_second() -> "EncoderConfig":
        return EncoderConfig(16000, tuple(SECOND_LAYERS))

    def parameter_count(self) -> int:
        """Closed-form count: sum of k*c_in*c_out + c_out per conv, plus the head."""
        total = 0
        c_in = 1
        for out_c, k, _ in self.layer_specs:
            total += k * c_in * out_c + out_c
            c_in = out_c
        total += c_in * self.embedding_dim + self.embedding_dim
        return total


class AudioEncoder(nn.Module):
    """Conv1d stack -> leaky activations -> global average pool -> affine head.

    Global pooling closes any gap between the stack's receptive field and
    the input length, so layer_specs need not cover the whole segment.
    """

    def __init__(self, config: EncoderConfig):
        super().__init__()
        self.config = config
        convs = []
        c_in = 1
        for out_c, k, s in config.layer_specs:
            convs.append(nn.Conv1d(c_in, out_c, k, stride=s, padding=k // 2))
            c_in = out_c
        self.convs = nn.ModuleList(convs)
        self.head = nn.Linear(c_in, config.embedding_dim)

    def forward(self, segment: torch.Tensor) -> torch.Tensor:
        if segment.dim() == 1:
            segment = segment.unsqueeze(0)
            squeeze = True
        elif segment.dim() == 2:
            squeeze = False
        else:
            raise ValueError("segment must be 1-D or (batch, length)")
        if segment.shape[-1] != self.config.input_length:
            raise ValueError(f"wrong input length: expected "
                             f"{self.config.input_length}, got {segment.shape[-1]}")
        x = segment.unsqueeze(1)
        for conv in self.convs:
            x = F.leaky_relu(conv(x), self.config.leaky_slope)
        x = x.mean(dim=2)
        y = self.head(x)
        return y.squeeze(0) if squeeze else y

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def init_encoder(config: EncoderConfig, seed: int, dtype=torch.float32) -> AudioEncoder:
    """Encoder with N(0, 0.02^2) weights and zero biases, deterministic per seed."""
    enc = AudioEncoder(config).to(dtype)
    seeded_init(enc, seed)
    return enc


def encode(segment, weights: AudioEncoder) -> torch.Tensor:
    """Map a waveform segment to its 128-d embedding (pure given weights)."""
    if not torch.is_tensor(segment):
        segment = torch.as_tensor(segment, dtype=next(weights.parameters()).dtype)
    return weights(segment)
