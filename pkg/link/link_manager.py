# link/link_manager.py

from __future__ import annotations

import logging
import os
import threading
from typing import Callable, Dict, List, Optional

from channel.capacity import source_bitrate
from channel.trace import read_trace
from config.config_store import read_json
from link import allocation_bridge, csi_bridge
from link import link_state as ls
from link.budget_unit import BudgetUnit, FrozenBases, LinkConfig, plan_budget
from link.mqtt_client import MqttClient
from logging_setup import configure_logging

_BASE_DIR = os.path.normpath(os.path.join(os.path.dirname(__file__), ".."))
LINKS_PATH = os.getenv("LINKS_PATH", os.path.join(_BASE_DIR, "config", "links.json"))


def load_links(path: str = LINKS_PATH) -> List[LinkConfig]:
    """Entries that fail validation are logged and skipped."""
    out = []
    for raw in read_json(path).get("links", []):
        try:
            out.append(LinkConfig.from_dict(raw))
        except ValueError as exc:
            logging.getLogger("link.LinkManager").error("Skipping link entry %s: %s", raw.get("link_id"), exc)
    return out


class LinkManager:
    """Owns the MQTT connection, the CSI watchdog and one budget unit per link."""

    def __init__(
        self,
        mqtt_host: str = "localhost",
        mqtt_port: int = 1883,
        links_path: str = LINKS_PATH,
        mqtt_factory: Callable[..., MqttClient] = MqttClient,
    ):
        self.logger = logging.getLogger("link.LinkManager")
        self.mqtt_host = mqtt_host
        self.mqtt_port = mqtt_port
        self.links_path = links_path
        self._mqtt_factory = mqtt_factory
        self._mqtt: Optional[MqttClient] = None
        self._configs: Dict[str, LinkConfig] = {}
        self._units: Dict[str, BudgetUnit] = {}
        self._threads: Dict[str, threading.Thread] = {}
        self._lock = threading.Lock()
        self._ensure_lock = threading.Lock()
        self._stop = threading.Event()
        self._watch_interval = float(os.getenv("LINKS_REFRESH_SEC", "10"))
        self._replayer = None
        self._started = False

    # ------------------------------------------------------------------ startup
    def start(self) -> None:
        if self._started:
            return
        self._stop.clear()
        links = load_links(self.links_path)
        ls.init_links([c.link_id for c in links])
        period = min((c.period_sec for c in links), default=1.0)
        ls.run_watchdog(period, self._stop)

        self._mqtt = self._mqtt_factory(client_id="link_hub", host=self.mqtt_host, port=self.mqtt_port)
        self._mqtt.connect()
        csi_bridge.wire(self._mqtt)
        allocation_bridge.wire(self._mqtt)
        self.logger.info("MQTT %s:%s wired, links=%s", self.mqtt_host, self.mqtt_port, [c.link_id for c in links])

        for cfg in links:
            self.ensure_link(cfg)
        self._started = True
        self._start_config_watcher()
        self._start_replayer_if_enabled()

    # ------------------------------------------------------------------ links
    def ensure_link(self, cfg: LinkConfig) -> None:
        """Start or replace the unit of `cfg.link_id`; calls for the same manager run one at a time."""
        with self._ensure_lock:
            self._ensure_link(cfg)

    def _ensure_link(self, cfg: LinkConfig) -> None:
        with self._lock:
            if self._mqtt is None:
                raise RuntimeError("LinkManager.start() must be called first")
            if self._configs.get(cfg.link_id) == cfg:
                return
            running = cfg.link_id in self._units
        if running:
            self.remove_link(cfg.link_id)
        try:
            frozen = FrozenBases.from_checkpoint(cfg.checkpoint)
            unit = BudgetUnit(cfg, self._mqtt, frozen)
        except (FileNotFoundError, ValueError, KeyError) as exc:
            self.logger.error("Cannot start link=%s: %s", cfg.link_id, exc)
            return
        ls.init_links([cfg.link_id])
        thread = threading.Thread(target=unit.loop_forever, name=f"budget_unit_{cfg.link_id}", daemon=True)
        thread.start()
        with self._lock:
            self._configs[cfg.link_id] = cfg
            self._units[cfg.link_id] = unit
            self._threads[cfg.link_id] = thread
        self.logger.info("Budget unit launched link=%s", cfg.link_id)

    def remove_link(self, link_id: str) -> None:
        with self._lock:
            self._configs.pop(link_id, None)
            unit = self._units.pop(link_id, None)
            thread = self._threads.pop(link_id, None)
        if unit:
            unit.stop()
        if thread:
            thread.join(timeout=1)
        ls.drop_link(link_id)
        self.logger.info("Budget unit removed link=%s", link_id)

    def link_ids(self) -> List[str]:
        with self._lock:
            return sorted(self._units)

    def plan(self, link_id: str, capacity_bps: float) -> dict:
        """One-shot budget and allocation for a hypothetical capacity."""
        with self._lock:
            unit = self._units.get(link_id)
        if unit is None:
            raise KeyError(link_id)
        budget, alloc = plan_budget(capacity_bps, unit.cfg.channel, unit.frozen)
        by_name = {name: alloc.per_source[sid] for name, sid in zip(unit.sources, sorted(unit.frozen.bases))}
        return {
            "link_id": link_id,
            "capacity_bps": capacity_bps,
            "budget": budget,
            "allocation": by_name,
            "bitrate_bps": source_bitrate(budget, unit.cfg.channel),
        }

    def _start_config_watcher(self) -> None:
        def _loop():
            while not self._stop.wait(self._watch_interval):
                try:
                    wanted = {c.link_id: c for c in load_links(self.links_path)}
                    for cfg in wanted.values():
                        self.ensure_link(cfg)
                    for link_id in self.link_ids():
                        if link_id not in wanted:
                            self.remove_link(link_id)
                except Exception as exc:
                    self.logger.error("Links watcher error: %s", exc)

        threading.Thread(target=_loop, name="links_watcher", daemon=True).start()

    def _start_replayer_if_enabled(self) -> None:
        if os.getenv("MOCK_CSI", "0").lower() not in ("1", "true", "yes"):
            return
        trace_path = os.getenv("TRACE_PATH", "")
        link_ids = self.link_ids()
        if not trace_path or not link_ids:
            self.logger.error("MOCK_CSI set but TRACE_PATH or links missing")
            return
        from link.trace_replayer import TraceReplayer

        try:
            replayer = TraceReplayer(
                self.mqtt_host,
                self.mqtt_port,
                link_ids[0],
                read_trace(trace_path),
                loop_sec=float(os.getenv("TRACE_LOOP_SEC", "0")) or None,
            )
            replayer.start()
        except Exception as exc:
            self.logger.error("Trace replayer start failed: %s", exc)
            return
        threading.Thread(target=replayer.run_forever, name="trace_replayer", daemon=True).start()
        self._replayer = replayer
        self.logger.info("Trace replayer started link=%s trace=%s", link_ids[0], trace_path)

    # ------------------------------------------------------------------ teardown
    def stop(self) -> None:
        self._stop.set()
        for link_id in self.link_ids():
            self.remove_link(link_id)
        if self._replayer is not None:
            self._replayer.stop()
            self._replayer = None
        if self._mqtt:
            self._mqtt.disconnect()
            self._mqtt = None
        self._started = False
        self.logger.info("Link manager stopped")


_GLOBAL_MANAGER: Optional[LinkManager] = None


def get_manager() -> LinkManager:
    global _GLOBAL_MANAGER
    if _GLOBAL_MANAGER is None:
        host = os.getenv("MQTT_HOST", "localhost")
        port = int(os.getenv("MQTT_PORT", "1883"))
        _GLOBAL_MANAGER = LinkManager(mqtt_host=host, mqtt_port=port)
        _GLOBAL_MANAGER.start()
    return _GLOBAL_MANAGER


def main() -> None:
    configure_logging()
    manager = get_manager()
    try:
        while True:
            threading.Event().wait(3600)
    except KeyboardInterrupt:
        manager.stop()


if __name__ == "__main__":
    main()
