"""Multi-scale STFT discriminator: per-scale logits and intermediate feature maps."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import torch
from torch import nn


@dataclass(frozen=True)
class ScaleConfig:
    scales: Tuple[Tuple[int, int], ...] = ((512, 128), (1024, 256), (2048, 512))  # (fft_size, hop)
    channels: int = 32
    kernel: Tuple[int, int] = (3, 9)      # (time, freq)
    stride: Tuple[int, int] = (1, 2)
    dilations: Tuple[int, ...] = (1, 2, 4)
    negative_slope: float = 0.2

    def __post_init__(self):
        if len({fft for fft, _ in self.scales}) < 2:
            raise ValueError(f"need at least 2 distinct STFT scales, got {self.scales}")
        for fft, hop in self.scales:
            if fft <= 0 or hop <= 0:
                raise ValueError(f"scale ({fft}, {hop}) must be positive")
        if self.channels <= 0 or min(self.kernel) <= 0 or min(self.stride) <= 0 or min(self.dilations) <= 0:
            raise ValueError("conv stack sizes must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "ScaleConfig":
        kw = {}
        if "scales" in raw:
            kw["scales"] = tuple((int(f), int(h)) for f, h in raw["scales"])
        elif "fft_sizes" in raw:
            kw["scales"] = tuple((int(f), int(f) // 4) for f in raw["fft_sizes"])
        for key in ("kernel", "stride", "dilations"):
            if key in raw:
                kw[key] = tuple(int(v) for v in raw[key])
        if "channels" in raw:
            kw["channels"] = int(raw["channels"])
        return cls(**kw)

    @property
    def longest_fft(self) -> int:
        return max(fft for fft, _ in self.scales)


def get_2d_padding(kernel_size: Sequence[int], dilation: Sequence[int] = (1, 1)) -> Tuple[int, int]:
    return (
        ((kernel_size[0] - 1) * dilation[0]) // 2,
        ((kernel_size[1] - 1) * dilation[1]) // 2,
    )


class DiscriminatorSTFT(nn.Module):
    def __init__(self, n_fft: int, hop_length: int, cfg: ScaleConfig):
        super().__init__()
        self.n_fft = n_fft
        self.hop_length = hop_length
        c, k = cfg.channels, cfg.kernel

        def act() -> nn.Module:
            return nn.LeakyReLU(cfg.negative_slope)

        self.convs = nn.ModuleList()
        self.convs.append(nn.Sequential(nn.Conv2d(2, c, kernel_size=k, padding=get_2d_padding(k)), act()))
        for d in cfg.dilations:
            self.convs.append(
                nn.Sequential(
                    nn.Conv2d(c, c, kernel_size=k, stride=cfg.stride, dilation=(d, 1), padding=get_2d_padding(k, (d, 1))),
                    act(),
                )
            )
        self.convs.append(nn.Sequential(nn.Conv2d(c, c, kernel_size=(3, 3), padding=(1, 1)), act()))
        self.conv_post = nn.Conv2d(c, 1, kernel_size=(3, 3), padding=(1, 1))

    def spectrogram(self, x: torch.Tensor) -> torch.Tensor:
        """B x 1 x L -> B x 2 x T' x F (real, imag)."""
        window = torch.hann_window(self.n_fft, dtype=x.dtype, device=x.device)
        z = torch.stft(
            x.squeeze(1),
            n_fft=self.n_fft,
            hop_length=self.hop_length,
            win_length=self.n_fft,
            window=window,
            center=True,
            normalized=True,
            return_complex=True,
        )
        z = torch.stack([z.real, z.imag], dim=1)
        return z.permute(0, 1, 3, 2).contiguous()

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, List[torch.Tensor]]:
        fmap = []
        z = self.spectrogram(x)
        for layer in self.convs:
            z = layer(z)
            fmap.append(z)
        logit_map = self.conv_post(z)
        return logit_map.mean(dim=(1, 2, 3)), fmap


class MultiScaleSTFTDiscriminator(nn.Module):
    def __init__(self, cfg: ScaleConfig = ScaleConfig()):
        super().__init__()
        self.cfg = cfg
        self.discriminators = nn.ModuleList(DiscriminatorSTFT(fft, hop, cfg) for fft, hop in cfg.scales)

    @property
    def num_discriminators(self) -> int:
        return len(self.discriminators)

    def forward(self, x: torch.Tensor) -> Tuple[List[torch.Tensor], List[List[torch.Tensor]]]:
        if x.ndim != 3 or x.shape[1] != 1:
            raise ValueError(f"discriminator expects B x 1 x L, got {tuple(x.shape)}")
        if x.shape[-1] < self.cfg.longest_fft:
            raise ValueError(f"waveform of {x.shape[-1]} samples is shorter than the largest FFT ({self.cfg.longest_fft})")
        logits, fmaps = [], []
        for disc in self.discriminators:
            logit, fmap = disc(x)
            logits.append(logit)
            fmaps.append(fmap)
        return logits, fmaps


def msstft_forward(w: torch.Tensor, disc: MultiScaleSTFTDiscriminator):
    """Per-scale (scalar logit per item, feature maps)."""
    return disc(w)
