"""Small conditional score network: (x_t, y, t) -> score shaped like x_t."""

from __future__ import annotations

import math

import torch
import torch.nn.functional as F
from torch import nn

from enhance.sde import SdeParams, marginal_std


class SinusoidalEmbedding(nn.Module):
    def __init__(self, dim: int):
        super().__init__()
        if dim % 2:
            raise ValueError(f"embedding dim must be even, got {dim}")
        self.dim = dim

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        half = self.dim // 2
        freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=t.dtype, device=t.device) / half)
        args = t[:, None] * 1000.0 * freqs[None, :]
        return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class ScoreNet(nn.Module):
    """Conv net conditioned on y by channel concatenation and on t by an additive embedding.

    The raw output is divided by the kernel std, so the network itself predicts -z.
    """

    def __init__(self, sde: SdeParams, channels: int = 2, hidden: int = 32, emb_dim: int = 16):
        super().__init__()
        self.sde = sde
        self.embed = SinusoidalEmbedding(emb_dim)
        self.t_proj = nn.Linear(emb_dim, hidden)
        self.conv_in = nn.Conv2d(2 * channels, hidden, 3, padding=1)
        self.conv_mid = nn.Conv2d(hidden, hidden, 3, padding=1)
        self.conv_out = nn.Conv2d(hidden, channels, 3, padding=1)

    def forward(self, x_t: torch.Tensor, y: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
        if x_t.shape != y.shape:
            raise ValueError(f"x_t {tuple(x_t.shape)} and y {tuple(y.shape)} differ")
        t = t.to(x_t.dtype).expand(x_t.shape[0]) if t.ndim == 0 else t.to(x_t.dtype)
        h = self.conv_in(torch.cat([x_t, y], dim=1))
        h = F.silu(h + self.t_proj(self.embed(t))[:, :, None, None])
        h = F.silu(self.conv_mid(h))
        std = marginal_std(t, self.sde).view(-1, 1, 1, 1)
        return self.conv_out(h) / std
