"""Synthetic correlated multi-microphone corpus.

One harmonic, amplitude-modulated "speech-like" source is picked up by every microphone
with its own gain, integer delay and additive white noise at a configured SNR.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import torch

from data.corpus import MultiSourceDataset, MultiSourceItem

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    n_sources: int = 4
    clip_seconds: float = 0.064
    sample_rate: int = 16000
    delay_range: Tuple[int, int] = (0, 4)          # samples
    gain_range: Tuple[float, float] = (0.6, 1.0)
    snr_range_db: Tuple[float, float] = (10.0, 20.0)
    noise_weight: float = 1.0
    f0_range: Tuple[float, float] = (100.0, 220.0)
    harmonics: int = 8
    n_clips: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.n_clips < 1 or self.n_sources < 1:
            raise ValueError(f"n_clips and n_sources must be >= 1, got {self.n_clips}, {self.n_sources}")
        if self.delay_range[0] < 0 or self.delay_range[0] > self.delay_range[1]:
            raise ValueError(f"bad delay range {self.delay_range}")
        if not all(math.isfinite(v) for v in self.snr_range_db):
            raise ValueError(f"SNR range must be finite, got {self.snr_range_db}")
        if self.clip_seconds <= 0:
            raise ValueError(f"clip_seconds must be positive, got {self.clip_seconds}")

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthConfig":
        kw = dict(raw)
        for key in ("delay_range", "gain_range", "snr_range_db", "f0_range"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return cls(**{k: v for k, v in kw.items() if k in cls.__dataclass_fields__})

    @property
    def clip_samples(self) -> int:
        return int(round(self.clip_seconds * self.sample_rate))


def _speech_like(rng: np.random.Generator, cfg: SynthConfig) -> np.ndarray:
    n = cfg.clip_samples
    t = np.arange(n) / cfg.sample_rate
    f0 = rng.uniform(*cfg.f0_range)
    vibrato = 1.0 + 0.03 * np.sin(2 * np.pi * rng.uniform(3.0, 6.0) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0 * vibrato) / cfg.sample_rate
    clean = np.zeros(n)
    for k in range(1, cfg.harmonics + 1):
        clean += np.sin(k * phase + rng.uniform(0, 2 * np.pi)) / k
    envelope = 0.6 + 0.4 * np.sin(2 * np.pi * rng.uniform(2.0, 8.0) * t + rng.uniform(0, 2 * np.pi))
    clean *= envelope
    return clean / (1.25 * np.max(np.abs(clean)))


def _delayed(x: np.ndarray, d: int) -> np.ndarray:
    out = np.zeros_like(x)
    out[d:] = x[: len(x) - d]
    return out


def synth_corpus(cfg: SynthConfig) -> MultiSourceDataset:
    rng = np.random.default_rng(cfg.seed)
    items = []
    for clip in range(cfg.n_clips):
        clean = _speech_like(rng, cfg)
        mics, gains, delays, snrs = [], [], [], []
        for _ in range(cfg.n_sources):
            gain = rng.uniform(*cfg.gain_range)
            delay = int(rng.integers(cfg.delay_range[0], cfg.delay_range[1] + 1))
            snr = rng.uniform(*cfg.snr_range_db)
            signal = gain * _delayed(clean, delay)
            noise = rng.standard_normal(len(clean))
            noise *= math.sqrt(np.sum(signal ** 2) / (np.sum(noise ** 2) * 10 ** (snr / 10)))
            mics.append(signal + cfg.noise_weight * noise)
            gains.append(gain)
            delays.append(delay)
            snrs.append(snr)
        items.append(
            MultiSourceItem(
                clean=torch.from_numpy(clean),
                mics=torch.from_numpy(np.stack(mics)),
                meta={"clip": clip, "gains": gains, "delays": delays, "snr_db": snrs},
            )
        )
    logger.info("Synthesised corpus clips=%d sources=%d samples=%d", cfg.n_clips, cfg.n_sources, cfg.clip_samples)
    return MultiSourceDataset(items=items, sample_rate=cfg.sample_rate)
