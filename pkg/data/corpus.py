"""Multi-microphone corpus containers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
import torch


@dataclass
class MultiSourceItem:
    clean: torch.Tensor                   # (L,)
    mics: torch.Tensor                    # (S, L)
    meta: Dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mics.ndim != 2 or self.mics.shape[1] != self.clean.shape[0]:
            raise ValueError(f"mics {tuple(self.mics.shape)} not aligned with clean {tuple(self.clean.shape)}")


@dataclass
class MultiSourceDataset:
    items: List[MultiSourceItem]
    sample_rate: int = 16000

    def __post_init__(self):
        counts = {item.mics.shape[0] for item in self.items}
        if len(counts) > 1:
            raise ValueError(f"source count varies across items: {sorted(counts)}")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def n_sources(self) -> int:
        return int(self.items[0].mics.shape[0]) if self.items else 0

    def subset(self, indices: List[int]) -> "MultiSourceDataset":
        return MultiSourceDataset(items=[self.items[i] for i in indices], sample_rate=self.sample_rate)


def split_dataset(ds: MultiSourceDataset, train_fraction: float = 0.8, seed: int = 0) -> Tuple[MultiSourceDataset, MultiSourceDataset]:
    """Seeded split by clip."""
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    order = np.random.default_rng(seed).permutation(len(ds)).tolist()
    cut = max(1, min(len(ds) - 1, int(round(train_fraction * len(ds)))))
    return ds.subset(sorted(order[:cut])), ds.subset(sorted(order[cut:]))


def pairwise_correlation(mics: torch.Tensor) -> float:
    """Mean Pearson correlation over distinct microphone pairs of one item."""
    c = torch.corrcoef(mics)
    s = c.shape[0]
    off = c[~torch.eye(s, dtype=torch.bool)]
    return float(off.mean())
