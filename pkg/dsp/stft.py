"""Waveform <-> spectrogram conversion and (magnitude, phase) packing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import torch


@dataclass(frozen=True)
class StftConfig:
    fft_size: int = 2048
    hop: int = 512
    window: int = 2048
    sample_rate: int = 16000

    def __post_init__(self):
        for name in ("fft_size", "hop", "window", "sample_rate"):
            if int(getattr(self, name)) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if not (self.hop <= self.window <= self.fft_size):
            raise ValueError(
                f"need hop <= window <= fft_size, got hop={self.hop} window={self.window} fft_size={self.fft_size}"
            )

    @property
    def freq_bins(self) -> int:
        return self.fft_size // 2 + 1

    def frames_for(self, n_samples: int) -> int:
        # center padding adds fft_size // 2 on each side
        return 1 + n_samples // self.hop

    def samples_for(self, n_frames: int) -> int:
        return (n_frames - 1) * self.hop


@dataclass
class Waveform:
    samples: torch.Tensor
    sample_rate: int = 16000

    def __post_init__(self):
        if self.samples.ndim != 1:
            raise ValueError(f"waveform must be 1-D, got shape {tuple(self.samples.shape)}")
        if self.samples.numel() == 0:
            raise ValueError("waveform is empty")
        if not torch.isfinite(self.samples).all():
            raise ValueError("waveform contains non-finite samples")

    def __len__(self) -> int:
        return int(self.samples.numel())


@dataclass
class Spectrogram:
    bins: torch.Tensor  # complex F x T
    config: StftConfig

    @property
    def shape(self):
        return tuple(self.bins.shape)


def _window(cfg: StftConfig, like: torch.Tensor) -> torch.Tensor:
    dtype = like.real.dtype if like.is_complex() else like.dtype
    return torch.hann_window(cfg.window, periodic=True, dtype=dtype, device=like.device)


def stft(w: Waveform, cfg: StftConfig) -> Spectrogram:
    if len(w) < cfg.window:
        raise ValueError(f"signal of {len(w)} samples is shorter than one window ({cfg.window})")
    bins = stft_tensor(w.samples, cfg)
    return Spectrogram(bins=bins, config=cfg)


def stft_tensor(samples: torch.Tensor, cfg: StftConfig) -> torch.Tensor:
    """Batched STFT on a (..., L) real tensor; returns complex (..., F, T)."""
    return torch.stft(
        samples,
        n_fft=cfg.fft_size,
        hop_length=cfg.hop,
        win_length=cfg.window,
        window=_window(cfg, samples),
        center=True,
        pad_mode="reflect",
        return_complex=True,
    )


def istft(s: Spectrogram, cfg: StftConfig, length: int | None = None) -> Waveform:
    if s.bins.shape[-2] != cfg.freq_bins:
        raise ValueError(f"spectrogram has {s.bins.shape[-2]} bins, config expects {cfg.freq_bins}")
    samples = istft_tensor(s.bins, cfg, length=length)
    return Waveform(samples=samples, sample_rate=cfg.sample_rate)


def istft_tensor(bins: torch.Tensor, cfg: StftConfig, length: int | None = None) -> torch.Tensor:
    if bins.shape[-2] != cfg.freq_bins:
        raise ValueError(f"spectrogram has {bins.shape[-2]} bins, config expects {cfg.freq_bins}")
    if length is None:
        length = cfg.samples_for(bins.shape[-1])
    return torch.istft(
        bins,
        n_fft=cfg.fft_size,
        hop_length=cfg.hop,
        win_length=cfg.window,
        window=_window(cfg, bins),
        center=True,
        length=length,
    )


# ---------------------------------------------------------------------- packing
def pack(specs: Sequence[Spectrogram]) -> torch.Tensor:
    """Stack spectrograms into a B x 2 x F x T (magnitude, phase) tensor."""
    if not specs:
        raise ValueError("nothing to pack")
    shape = specs[0].shape
    for s in specs:
        if s.shape != shape:
            raise ValueError(f"ragged batch: {s.shape} vs {shape}")
    bins = torch.stack([s.bins for s in specs])
    return pack_tensor(bins)


def pack_tensor(bins: torch.Tensor) -> torch.Tensor:
    """(..., F, T) complex -> (..., 2, F, T) real."""
    return torch.stack([bins.abs(), bins.angle()], dim=-3)


def unpack(t: torch.Tensor, cfg: StftConfig) -> List[Spectrogram]:
    if t.ndim != 4 or t.shape[1] != 2:
        raise ValueError(f"expected B x 2 x F x T, got {tuple(t.shape)}")
    if (t[:, 0] < 0).any():
        raise ValueError("negative magnitude in packed tensor")
    bins = torch.polar(t[:, 0], t[:, 1])
    return [Spectrogram(bins=b, config=cfg) for b in bins]


def to_complex(t: torch.Tensor) -> torch.Tensor:
    """(..., 2, F, T) -> complex (..., F, T) without a sign check on magnitude.

    Used on decoder outputs, which are unconstrained and must stay differentiable.
    """
    mag, phase = t.select(-3, 0), t.select(-3, 1)
    return torch.complex(mag * torch.cos(phase), mag * torch.sin(phase))


def to_waveform(t: torch.Tensor, cfg: StftConfig, length: int | None = None) -> torch.Tensor:
    """B x 2 x F x T -> B x 1 x L waveform batch."""
    return istft_tensor(to_complex(t), cfg, length=length).unsqueeze(1)


def wrap_phase(phase: torch.Tensor) -> torch.Tensor:
    """Map angles into (-pi, pi]."""
    wrapped = torch.remainder(phase + math.pi, 2 * math.pi) - math.pi
    return torch.where(wrapped == -math.pi, torch.full_like(wrapped, math.pi), wrapped)
