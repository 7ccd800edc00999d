"""Temporal conditional discriminator over frame sequences.

Each frame passes a shared (weight-tied) strided conv stack; a ConvGRU
consumes the per-frame feature maps in order, so permuting the frames
changes the score. The audio embedding is broadcast spatially and joined
after the recurrence, then reduced to a single realness probability.
"""

import math
from dataclasses import dataclass

import torch
import torch.nn.functional as F
from torch import nn

from .convgru import ConvGru, GruConfig, gru_step
from .inits import seeded_init


@dataclass(frozen=True)
class DiscriminatorConfig:
    in_size: int = 64
    base_channels: int = 64
    embedding_dim: int = 128
    leaky_slope: float = 0.2
    frames: int = 3
    gru_kernel: int = 3

    def __post_init__(self):
        if self.in_size < 8 or self.in_size & (self.in_size - 1):
            raise ValueError("in_size must be a power of two >= 8")
        if self.frames < 1:
            raise ValueError("frames must be >= 1")
        if self.base_channels < 2:
            raise ValueError("base_channels must be >= 2")

    @property
    def gru_hidden(self) -> int:
        return self.base_channels * 4


class Discriminator(nn.Module):
    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        n_blocks = int(math.log2(config.in_size // 4))
        blocks = []
        c_in = 3
        for i in range(n_blocks):
            c_out = config.base_channels * (2 ** i)
            layers = [nn.Conv2d(c_in, c_out, 4, stride=2, padding=1, bias=False)]
            if i > 0:  # no batch norm in the first block
                layers.append(nn.BatchNorm2d(c_out))
            layers.append(nn.LeakyReLU(config.leaky_slope))
            blocks.append(nn.Sequential(*layers))
            c_in = c_out
        self.blocks = nn.ModuleList(blocks)
        self.gru = ConvGru(GruConfig(c_in, config.gru_hidden, 4, 4,
                                     config.gru_kernel))
        self.reduce = nn.Conv2d(config.gru_hidden + config.embedding_dim,
                                config.base_channels * 2, 3, padding=1)
        self.head = nn.Linear(config.base_channels * 2, 1)

    def features(self, frame: torch.Tensor) -> torch.Tensor:
        x = frame
        for block in self.blocks:
            x = block(x)
        return x

    def logits(self, frames: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        """Pre-sigmoid realness; the trainer works in logit space so its
        losses keep nonzero gradients even when the sigmoid saturates."""
        batched = frames.dim() == 5
        if not batched:
            frames, y = frames.unsqueeze(0), y.unsqueeze(0)
        if frames.dim() != 5 or frames.shape[2] != 3:
            raise ValueError("frames must be (batch, T, 3, H, W)")
        b, t = frames.shape[:2]
        if t != self.config.frames:
            raise ValueError(f"wrong frame count: expected "
                             f"{self.config.frames}, got {t}")
        if frames.shape[-2:] != (self.config.in_size, self.config.in_size):
            raise ValueError(f"wrong resolution: expected "
                             f"{self.config.in_size}x{self.config.in_size}")
        if y.shape != (b, self.config.embedding_dim):
            raise ValueError("embedding shape does not match batch")

        feats = self.features(frames.reshape(b * t, 3, *frames.shape[-2:]))
        feats = feats.view(b, t, *feats.shape[1:])
        h = torch.zeros(b, self.config.gru_hidden, 4, 4,
                        dtype=frames.dtype, device=frames.device)
        for step in range(t):
            h = gru_step(feats[:, step], h, self.gru)

        y_map = y[:, :, None, None].expand(-1, -1, 4, 4)
        x = F.leaky_relu(self.reduce(torch.cat([h, y_map], dim=1)),
                         self.config.leaky_slope)
        logit = self.head(x.mean(dim=(2, 3))).squeeze(1)
        return logit if batched else logit.squeeze(0)

    def forward(self, frames: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
        return torch.sigmoid(self.logits(frames, y))

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def init_discriminator(config: DiscriminatorConfig, seed: int,
                       dtype=torch.float32) -> Discriminator:
    disc = Discriminator(config).to(dtype)
    seeded_init(disc, seed)
    return disc


def discriminate(frames, y, weights: Discriminator) -> torch.Tensor:
    """Realness probability in (0, 1) for a frame sequence under condition y."""
    return weights(frames, y)
