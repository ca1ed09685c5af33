"""Rate-distortion bit accounting: capacity -> dimension budget -> per-source bitrate."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChannelParams:
    eta: float = 1.0          # symbols per transmitted float
    period_T: float = 1.0     # seconds between encoder outputs
    source_var: float = 4.0   # sigma^2
    quant_dist: float = 1.0   # D

    def __post_init__(self):
        for name in ("eta", "period_T", "source_var", "quant_dist"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value <= 0:
                raise ValueError(f"{name} must be positive and finite, got {value}")
        if self.quant_dist >= self.source_var:
            raise ValueError(
                f"rate bound non-positive: quant_dist={self.quant_dist} >= source_var={self.source_var}"
            )

    @classmethod
    def from_dict(cls, raw: dict) -> "ChannelParams":
        return cls(
            eta=float(raw.get("eta", 1.0)),
            period_T=float(raw.get("period_T", 1.0)),
            source_var=float(raw.get("source_var", 4.0)),
            quant_dist=float(raw.get("quant_dist", 1.0)),
        )

    @property
    def bits_per_float(self) -> float:
        """eta * log2(sigma^2 / D): bits one transmitted dimension costs per period, times two."""
        return self.eta * math.log2(self.source_var / self.quant_dist)


def rate_lower_bound(source_var: float, quant_dist: float) -> float:
    """Minimum bits per symbol for distortion <= D on a Gaussian source of variance sigma^2."""
    if quant_dist <= 0 or source_var <= 0:
        raise ValueError(f"variance and distortion must be positive, got {source_var}, {quant_dist}")
    if quant_dist >= source_var:
        raise ValueError(f"rate bound non-positive: quant_dist={quant_dist} >= source_var={source_var}")
    return 0.5 * math.log2(source_var / quant_dist)


def source_bitrate(dim: int, p: ChannelParams) -> float:
    """Bits per second needed to send `dim` floats every period (Gaussian worst case)."""
    if int(dim) != dim or dim < 0:
        raise ValueError(f"dim must be a non-negative integer, got {dim}")
    return dim * p.bits_per_float / (2.0 * p.period_T)


def dimension_budget(capacity_bps: float, p: ChannelParams) -> int:
    """Total encoder-output floats all sources may send per period at capacity C_t.

    The largest k with source_bitrate(k) <= capacity; the quotient is corrected for rounding on both sides.
    """
    if not math.isfinite(capacity_bps) or capacity_bps < 0:
        raise ValueError(f"capacity must be finite and >= 0, got {capacity_bps}")
    budget = int(math.floor(2.0 * capacity_bps * p.period_T / p.bits_per_float))
    while budget > 0 and source_bitrate(budget, p) > capacity_bps:
        budget -= 1
    while source_bitrate(budget + 1, p) <= capacity_bps:
        budget += 1
    return budget
