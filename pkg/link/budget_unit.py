# link/budget_unit.py

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from channel.capacity import ChannelParams, dimension_budget, source_bitrate
from codec.training import load_checkpoint
from config.validators import validate_link
from link import allocation_bridge as ab
from link import link_state as ls
from ndpca.allocation import BandwidthAllocation, allocate_components, equal_split
from ndpca.pca import PcaBasis


@dataclass(frozen=True)
class LinkConfig:
    link_id: str
    checkpoint: str
    period_sec: float = 1.0
    channel: ChannelParams = field(default_factory=ChannelParams)
    sources: Tuple[str, ...] = ()

    @classmethod
    def from_dict(cls, raw: dict) -> "LinkConfig":
        err = validate_link(raw)
        if err:
            raise ValueError(f"invalid link config: {err}")
        return cls(
            link_id=raw["link_id"],
            checkpoint=raw["checkpoint"],
            period_sec=float(raw.get("period_sec", 1.0)),
            channel=ChannelParams.from_dict(raw.get("channel", {})),
            sources=tuple(str(s) for s in raw.get("sources", [])),
        )


@dataclass
class FrozenBases:
    """Per-encoder PCA bases of a trained checkpoint, keyed by encoder index."""

    bases: Dict[int, PcaBasis]
    use_ndpca: bool = True

    @property
    def width(self) -> int:
        return sum(b.width for b in self.bases.values())

    @classmethod
    def from_checkpoint(cls, path: str) -> "FrozenBases":
        state = load_checkpoint(path)["pipeline"]
        bases = {int(sid): PcaBasis.from_state(raw) for sid, raw in state["bases"].items()}
        if not bases:
            raise ValueError(f"checkpoint {path} holds no PCA bases")
        return cls(bases=bases, use_ndpca=bool(state["variant"].get("use_ndpca", True)))


def plan_budget(capacity_bps: float, channel: ChannelParams, frozen: FrozenBases) -> Tuple[int, BandwidthAllocation]:
    """Budget from capacity, clamped to the total latent width, split over the encoders."""
    budget = min(dimension_budget(capacity_bps, channel), frozen.width)
    ids = sorted(frozen.bases)
    if frozen.use_ndpca:
        alloc = allocate_components([frozen.bases[i] for i in ids], budget, ids)
    else:
        alloc = equal_split({i: frozen.bases[i].width for i in ids}, budget)
    return budget, alloc


class BudgetUnit:
    """Turns the averaged CSI of one link into per-source component counts."""

    def __init__(self, cfg: LinkConfig, mqtt_client, frozen: FrozenBases):
        self.logger = logging.getLogger(f"link.BudgetUnit[{cfg.link_id}]")
        self.cfg = cfg
        self.mqtt = mqtt_client
        self.frozen = frozen
        self.sources: List[str] = list(cfg.sources) or [f"enc{i}" for i in sorted(frozen.bases)]
        if len(self.sources) != len(frozen.bases):
            raise ValueError(
                f"link {cfg.link_id}: {len(self.sources)} source names for {len(frozen.bases)} encoders"
            )
        self._sent: Dict[str, int] = {}
        self._stop = threading.Event()
        self.logger.info("Budget unit ready width=%d period=%.2fs", frozen.width, cfg.period_sec)

    # ------------------------------------------------------------------ lifecycle
    def step(self) -> Optional[BandwidthAllocation]:
        link = ls.get_link(self.cfg.link_id)
        if not link or link["avg_capacity_bps"] is None:
            return None
        budget, alloc = plan_budget(link["avg_capacity_bps"], self.cfg.channel, self.frozen)
        bitrate = source_bitrate(budget, self.cfg.channel)
        by_name = {name: alloc.per_source[sid] for name, sid in zip(self.sources, sorted(self.frozen.bases))}
        for name, k in by_name.items():
            if self._sent.get(name) != k:
                ab.send_allocation(self.mqtt, self.cfg.link_id, name, k, budget, source_bitrate(k, self.cfg.channel))
                self._sent[name] = k
        ls.set_allocation(self.cfg.link_id, budget, by_name, bitrate)
        return alloc

    def loop_forever(self) -> None:
        while not self._stop.is_set():
            try:
                self.step()
            except Exception as exc:
                self.logger.error("Budget step failed: %s", exc)
            self._stop.wait(self.cfg.period_sec)
        self.logger.info("Budget unit stopped")

    def stop(self) -> None:
        self._stop.set()
