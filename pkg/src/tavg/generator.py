"""Conditional generator: fuse noise + audio embedding, upsample, emit frames.

Three head variants behind one output contract (frames in [-1, 1]):

  with_gru  -- a ConvGRU with 3 hidden channels is unrolled 3 steps over the
               same backbone feature map; the hidden states ARE the frames.
  no_gru    -- a single conv emits 9 channels, tanh-squashed and split into
               3 frames (recurrence ablated).
  baseline  -- a single conv emits one 3-channel frame (single-frame regime).
"""

import math
from dataclasses import dataclass

import torch
from torch import nn

from .convgru import ConvGru, GruConfig, unroll
from .inits import seeded_init

MODES = ("with_gru", "no_gru", "baseline")
NOISE_DIM = 100


@dataclass(frozen=True)
class GeneratorConfig:
    mode: str = "with_gru"
    noise_dim: int = NOISE_DIM
    embedding_dim: int = 128
    base_channels: int = 64
    out_size: int = 64
    gru_kernel: int = 3

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown generator mode {self.mode!r}")
        # Power-of-two sizes down to 8 so tiny test configs stay valid.
        if self.out_size < 8 or self.out_size & (self.out_size - 1):
            raise ValueError("out_size must be a power of two >= 8")
        if self.noise_dim <= 0 or self.base_channels < 2:
            raise ValueError("noise_dim must be positive and base_channels >= 2")

    @property
    def frames_per_sample(self) -> int:
        return 1 if self.mode == "baseline" else 3

    def block_channels(self) -> list:
        """Channel plan from the 4x4 seed map to the head input, halving per block."""
        n_blocks = int(math.log2(self.out_size // 4))
        c0 = self.base_channels * (2 ** (n_blocks - 1))
        return [max(c0 >> i, 1) for i in range(n_blocks + 1)]


class Generator(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        channels = config.block_channels()
        self.fusion = nn.Linear(config.noise_dim + config.embedding_dim,
                                channels[0] * 4 * 4)
        blocks = []
        for c_in, c_out in zip(channels[:-1], channels[1:]):
            blocks.append(nn.Sequential(
                nn.ConvTranspose2d(c_in, c_out, 4, stride=2, padding=1, bias=False),
                # torch momentum 0.1 == running average decay 0.9
                nn.BatchNorm2d(c_out),
                nn.ReLU(),
            ))
        self.blocks = nn.ModuleList(blocks)
        head_in = channels[-1]
        if config.mode == "with_gru":
            self.head = ConvGru(GruConfig(head_in, 3, config.out_size,
                                          config.out_size, config.gru_kernel))
        elif config.mode == "no_gru":
            self.head = nn.Conv2d(head_in, 9, 3, padding=1, bias=False)
        else:
            self.head = nn.Conv2d(head_in, 3, 3, padding=1, bias=False)

    def forward(self, z: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        batched = z.dim() == 2
        if not batched:
            z, y = z.unsqueeze(0), y.unsqueeze(0)
        if z.shape[1] != self.config.noise_dim:
            raise ValueError(f"noise must have {self.config.noise_dim} dims")
        if y.shape[1] != self.config.embedding_dim:
            raise ValueError(f"embedding must have {self.config.embedding_dim} dims")
        if z.shape[0] != y.shape[0]:
            raise ValueError("noise/embedding batch sizes differ")

        x = self.fusion(torch.cat([z, y], dim=1))
        x = x.view(z.shape[0], -1, 4, 4)
        for block in self.blocks:
            x = block(x)

        if self.config.mode == "with_gru":
            h0 = torch.zeros(x.shape[0], 3, self.config.out_size,
                             self.config.out_size, dtype=x.dtype, device=x.device)
            frames = torch.stack(unroll((x, 3), h0, self.head), dim=1)
        elif self.config.mode == "no_gru":
            out = torch.tanh(self.head(x))
            frames = out.view(x.shape[0], 3, 3,
                              self.config.out_size, self.config.out_size)
        else:
            frames = torch.tanh(self.head(x)).unsqueeze(1)
        return frames if batched else frames.squeeze(0)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def init_generator(config: GeneratorConfig, seed: int, dtype=torch.float32) -> Generator:
    gen = Generator(config).to(dtype)
    seeded_init(gen, seed)
    return gen


def generate(z, y, weights: Generator) -> torch.Tensor:
    """Inference-mode frame synthesis: batch-norm running stats, no grads."""
    was_training = weights.training
    weights.eval()
    try:
        with torch.no_grad():
            return weights(z, y)
    finally:
        weights.train(was_training)


def sample_noise(batch: int, generator: torch.Generator,
                 dim: int = NOISE_DIM, dtype=torch.float32) -> torch.Tensor:
    return torch.randn(batch, dim, generator=generator, dtype=dtype)
