"""Per-source spectral encoder and shared central decoder."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import List, Sequence, Tuple

import torch
import torch.nn.functional as F
from torch import nn

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArchConfig:
    freq_bins: int = 129
    frames: int = 16
    freq_proj_hidden: int = 256
    freq_proj_out: int = 128
    n_res_blocks: int = 2
    latent_dim: int = 64      # total width across all encoders of a pipeline
    conv_channels: int = 32
    kernel: int = 3
    out_channels: int = 2

    def __post_init__(self):
        for name, value in asdict(self).items():
            if int(value) != value or value < (0 if name == "n_res_blocks" else 1):
                raise ValueError(f"{name} must be a positive integer, got {value}")
        if self.kernel % 2 == 0:
            raise ValueError(f"kernel must be odd for same-length padding, got {self.kernel}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ArchConfig":
        known = {k: int(v) for k, v in raw.items() if k in cls.__dataclass_fields__}
        return cls(**known)


class ResidualBlock(nn.Module):
    """h + ReLU(LN2(Conv(ReLU(LN1(Conv(h)))))) over the time axis."""

    def __init__(self, channels: int, kernel: int):
        super().__init__()
        self.conv1 = nn.Conv1d(channels, channels, kernel, padding=kernel // 2)
        self.norm1 = nn.GroupNorm(1, channels)
        self.conv2 = nn.Conv1d(channels, channels, kernel, padding=kernel // 2)
        self.norm2 = nn.GroupNorm(1, channels)

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        r = F.relu(self.norm1(self.conv1(h)))
        r = F.relu(self.norm2(self.conv2(r)))
        return h + r


class SpectralEncoder(nn.Module):
    """B x C x F x T spectrogram block -> B x Z latent."""

    def __init__(self, cfg: ArchConfig, in_channels: int, latent_width: int):
        super().__init__()
        self.cfg = cfg
        self.in_channels = in_channels
        self.latent_width = latent_width
        self.w1 = nn.Linear(cfg.freq_bins, cfg.freq_proj_hidden)
        self.w2 = nn.Linear(cfg.freq_proj_hidden, cfg.freq_proj_out)
        self.conv_in = nn.Conv1d(in_channels * cfg.freq_proj_out, cfg.conv_channels, cfg.kernel, padding=cfg.kernel // 2)
        self.blocks = nn.ModuleList(ResidualBlock(cfg.conv_channels, cfg.kernel) for _ in range(cfg.n_res_blocks))
        self.to_latent = nn.Linear(cfg.conv_channels * cfg.frames, latent_width)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        expected = (self.in_channels, self.cfg.freq_bins, self.cfg.frames)
        if x.ndim != 4 or tuple(x.shape[1:]) != expected:
            raise ValueError(f"encoder expects B x {expected}, got {tuple(x.shape)}")
        b = x.shape[0]
        f = x.transpose(-1, -2)                      # B C T F
        f = F.relu(self.w2(F.relu(self.w1(f))))      # B C T 128
        h = f.permute(0, 1, 3, 2).reshape(b, -1, self.cfg.frames)
        h = F.relu(self.conv_in(h))
        for block in self.blocks:
            h = block(h)
        return self.to_latent(h.flatten(1))


class SpectralDecoder(nn.Module):
    """B x Z' concatenated latent -> B x C_out x F x T."""

    def __init__(self, cfg: ArchConfig, latent_width: int):
        super().__init__()
        self.cfg = cfg
        self.latent_width = latent_width
        width = cfg.freq_proj_out
        self.from_latent = nn.Linear(latent_width, width * cfg.frames)
        self.blocks = nn.ModuleList(ResidualBlock(width, cfg.kernel) for _ in range(cfg.n_res_blocks))
        self.w_freq = nn.Linear(width, cfg.out_channels * cfg.freq_bins)
        self.conv_out = nn.Conv2d(cfg.out_channels, cfg.out_channels, cfg.kernel, padding=cfg.kernel // 2)

    def forward(self, zhat: torch.Tensor) -> torch.Tensor:
        if zhat.ndim != 2 or zhat.shape[1] != self.latent_width:
            raise ValueError(f"decoder expects B x {self.latent_width}, got {tuple(zhat.shape)}")
        b = zhat.shape[0]
        cfg = self.cfg
        x0 = F.relu(self.from_latent(zhat)).view(b, cfg.freq_proj_out, cfg.frames)
        for block in self.blocks:
            x0 = block(x0)
        y = self.w_freq(x0.transpose(1, 2))          # B T C*F
        y = y.view(b, cfg.frames, cfg.out_channels, cfg.freq_bins).permute(0, 2, 3, 1)
        return self.conv_out(y)


def init_params(
    cfg: ArchConfig,
    seed: int,
    group_channels: Sequence[int] = (2,),
    dtype: torch.dtype = torch.float32,
) -> Tuple[nn.ModuleList, SpectralDecoder]:
    """Build one encoder per source group plus the shared decoder, reproducibly from `seed`.

    `cfg.latent_dim` is split evenly across the groups.
    """
    groups = len(group_channels)
    if groups < 1 or cfg.latent_dim % groups:
        raise ValueError(f"latent_dim {cfg.latent_dim} does not split over {groups} encoders")
    width = cfg.latent_dim // groups
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        encoders = nn.ModuleList(SpectralEncoder(cfg, c, width) for c in group_channels)
        decoder = SpectralDecoder(cfg, cfg.latent_dim)
    encoders.to(dtype)
    decoder.to(dtype)
    logger.info(
        "Codec initialised seed=%d encoders=%d params=%d",
        seed,
        groups,
        parameter_count(encoders) + parameter_count(decoder),
    )
    return encoders, decoder


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def zero_biases(module: nn.Module) -> None:
    with torch.no_grad():
        for name, p in module.named_parameters():
            if name.endswith("bias"):
                p.zero_()


def split_latents(z: torch.Tensor, widths: List[int]) -> List[torch.Tensor]:
    return list(torch.split(z, widths, dim=1))
