"""Convolutional GRU cell: gated recurrence over feature maps.

All gate transforms are 2-D convolutions with same-padding and no bias,
so the hidden state keeps the spatial extent of the input. One step:

    z      = sigmoid(conv(w_in_update, x) + conv(w_hid_update, h_prev))
    r      = sigmoid(conv(w_in_reset,  x) + conv(w_hid_reset,  h_prev))
    h_cand = f(conv(w_in_cand, x) + r * conv(w_hid_cand, h_prev))
    h      = (1 - z) * h_cand + z * h_prev

where f is tanh by default. The update gate z controls how much of the
previous state is carried forward; the reset gate r controls how much
history enters the candidate. With f = tanh and h0 in [-1, 1], every
state stays in [-1, 1] because each step is a convex combination.
"""

from dataclasses import dataclass

import torch
from torch import nn

from .inits import seeded_init

_ACTIVATIONS = {"tanh": torch.tanh, "identity": lambda t: t}


@dataclass(frozen=True)
class GruConfig:
    c_in: int
    c_h: int
    height: int
    width: int
    kernel_size: int = 3
    candidate_activation: str = "tanh"

    def __post_init__(self):
        if min(self.c_in, self.c_h, self.height, self.width) <= 0:
            raise ValueError("all ConvGRU dimensions must be positive")
        if self.kernel_size <= 0 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be a positive odd integer "
                             "(same-padding is only well defined for odd kernels)")
        if self.candidate_activation not in _ACTIVATIONS:
            raise ValueError(f"unknown candidate activation "
                             f"{self.candidate_activation!r}")


class ConvGru(nn.Module):
    """Holds the six gate kernels; convolutions are bias-free by design."""

    def __init__(self, config: GruConfig):
        super().__init__()
        self.config = config
        k = config.kernel_size
        pad = k // 2

        def conv(c_in):
            return nn.Conv2d(c_in, config.c_h, k, padding=pad, bias=False)

        self.in_update = conv(config.c_in)
        self.hid_update = conv(config.c_h)
        self.in_reset = conv(config.c_in)
        self.hid_reset = conv(config.c_h)
        self.in_cand = conv(config.c_in)
        self.hid_cand = conv(config.c_h)
        self._f = _ACTIVATIONS[config.candidate_activation]

    def forward(self, x, h_prev):
        return gru_step(x, h_prev, self)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())


def init_gru(config: GruConfig, seed: int, dtype=torch.float32) -> ConvGru:
    """Build a ConvGru with N(0, 0.02^2) kernels, deterministic per seed."""
    cell = ConvGru(config).to(dtype)
    seeded_init(cell, seed)
    return cell


def _check_shapes(x, h_prev, config: GruConfig):
    if x.dim() != h_prev.dim() or x.dim() not in (3, 4):
        raise ValueError("input and state must both be CHW or NCHW tensors")
    if x.shape[-3:] != (config.c_in, config.height, config.width):
        raise ValueError(f"input shape {tuple(x.shape[-3:])} does not match "
                         f"config ({config.c_in}, {config.height}, {config.width})")
    if h_prev.shape[-3:] != (config.c_h, config.height, config.width):
        raise ValueError(f"state shape {tuple(h_prev.shape[-3:])} does not match "
                         f"config ({config.c_h}, {config.height}, {config.width})")


def gates(x, h_prev, weights: ConvGru):
    """Return (update gate, reset gate, candidate state) for one step."""
    _check_shapes(x, h_prev, weights.config)
    batched = x.dim() == 4
    if not batched:
        x = x.unsqueeze(0)
        h_prev = h_prev.unsqueeze(0)
    z = torch.sigmoid(weights.in_update(x) + weights.hid_update(h_prev))
    r = torch.sigmoid(weights.in_reset(x) + weights.hid_reset(h_prev))
    h_cand = weights._f(weights.in_cand(x) + r * weights.hid_cand(h_prev))
    if not batched:
        z, r, h_cand = z.squeeze(0), r.squeeze(0), h_cand.squeeze(0)
    return z, r, h_cand


def blend(z, h_cand, h_prev):
    """Convex blend of candidate and carried state: (1 - z)*h_cand + z*h_prev."""
    if not (z.shape == h_cand.shape == h_prev.shape):
        raise ValueError("blend arguments must have identical shapes")
    return (1 - z) * h_cand + z * h_prev


def gru_step(x, h_prev, weights: ConvGru):
    z, _, h_cand = gates(x, h_prev, weights)
    return blend(z, h_cand, h_prev)


def unroll(inputs, h0, weights: ConvGru):
    """Apply gru_step over a sequence; returns the list of states h1..hT.

    `inputs` is either a list of per-step tensors or a (tensor, T) pair
    meaning the same input repeated T times.
    """
    if isinstance(inputs, tuple):
        x, steps = inputs
        inputs = [x] * steps
    if len(inputs) == 0:
        raise ValueError("cannot unroll an empty input sequence")
    states = []
    h = h0
    for x in inputs:
        h = gru_step(x, h, weights)
        states.append(h)
    return states
