"""Spectral batches: (clean B x 2 x F x T, [per-source B x 2 x F x T])."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, List, Tuple

import numpy as np
import torch
import torch.nn.functional as F

from data.corpus import MultiSourceDataset
from dsp.stft import StftConfig, pack_tensor, stft_tensor

logger = logging.getLogger(__name__)

Batch = Tuple[torch.Tensor, List[torch.Tensor]]


def fit_frames(t: torch.Tensor, frames: int) -> torch.Tensor:
    """Crop or zero-pad the last axis to `frames`."""
    have = t.shape[-1]
    if have >= frames:
        return t[..., :frames]
    return F.pad(t, (0, frames - have))


@dataclass
class SpectralCache:
    """Packed spectrograms of a whole dataset, computed once."""

    clean: torch.Tensor     # N x 2 x F x T
    mics: torch.Tensor      # N x S x 2 x F x T

    def __len__(self) -> int:
        return int(self.clean.shape[0])

    @property
    def n_sources(self) -> int:
        return int(self.mics.shape[1])


def spectral_cache(ds: MultiSourceDataset, stft_cfg: StftConfig, frames: int) -> SpectralCache:
    if len(ds) == 0:
        raise ValueError("dataset is empty")
    clean, mics = [], []
    for item in ds.items:
        clean.append(fit_frames(pack_tensor(stft_tensor(item.clean, stft_cfg)), frames))
        mics.append(fit_frames(pack_tensor(stft_tensor(item.mics, stft_cfg)), frames))
    cache = SpectralCache(clean=torch.stack(clean), mics=torch.stack(mics))
    logger.info("Spectral cache items=%d shape=%s", len(cache), tuple(cache.clean.shape[1:]))
    return cache


def iter_cache(cache: SpectralCache, batch_size: int, seed: int) -> Iterator[Batch]:
    """One epoch in seeded shuffled order; the last batch may be short."""
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    order = torch.from_numpy(np.random.default_rng(seed).permutation(len(cache)))
    for lo in range(0, len(cache), batch_size):
        idx = order[lo : lo + batch_size]
        mics = cache.mics[idx]
        yield cache.clean[idx], [mics[:, s] for s in range(cache.n_sources)]


def batch_iter(ds: MultiSourceDataset, batch_size: int, seed: int, stft_cfg: StftConfig, frames: int) -> Iterator[Batch]:
    return iter_cache(spectral_cache(ds, stft_cfg, frames), batch_size, seed)


def full_batch(cache: SpectralCache) -> Batch:
    return cache.clean, [cache.mics[:, s] for s in range(cache.n_sources)]
