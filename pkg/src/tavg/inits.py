"""Seed-deterministic weight initialization shared by all networks."""

import torch
from torch import nn

INIT_STD = 0.02


def seeded_init(module: nn.Module, seed: int, std: float = INIT_STD) -> nn.Module:
    """Initialize conv/linear weights from N(0, std^2), biases to zero.

    Batch-norm layers get scale 1, shift 0 and reset running statistics.
    Draws come from a private generator, so results depend only on the
    seed and the module's registration order, never on global RNG state.
    """
    gen = torch.Generator().manual_seed(seed)
    for m in module.modules():
        if isinstance(m, (nn.Conv1d, nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            with torch.no_grad():
                m.weight.normal_(0.0, std, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, (nn.BatchNorm1d, nn.BatchNorm2d)):
            with torch.no_grad():
                if m.weight is not None:
                    m.weight.fill_(1.0)
                if m.bias is not None:
                    m.bias.zero_()
            m.reset_running_stats()
    return module
