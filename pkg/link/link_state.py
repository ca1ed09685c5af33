# link/link_state.py
from __future__ import annotations

import copy
import logging
import threading
import time
from typing import Any, Dict, List, Optional

logger = logging.getLogger(__name__)

HISTORY_LEN = 3

_lock = threading.Lock()
_state: Dict[str, Dict[str, Any]] = {}
_history: Dict[str, List[float]] = {}


def _blank() -> Dict[str, Any]:
    return {
        "capacity_bps": None,       # last reported
        "avg_capacity_bps": None,   # mean of the last HISTORY_LEN reports
        "budget": None,
        "allocation": {},           # source name -> k
        "bitrate_bps": None,
        "acks": {},                 # source name -> {k, ts}
        "last_csi_seen": 0,
        "alerts": {"stale": False},
    }


def init_links(link_ids: List[str]) -> None:
    with _lock:
        for link_id in link_ids:
            _state.setdefault(link_id, _blank())


def drop_link(link_id: str) -> None:
    with _lock:
        _state.pop(link_id, None)
        _history.pop(link_id, None)


def reset() -> None:
    with _lock:
        _state.clear()
        _history.clear()


def update_capacity(link_id: str, capacity_bps: float, ts: int) -> float:
    """Record one CSI report; returns the running average."""
    with _lock:
        link = _state.setdefault(link_id, _blank())
        hist = _history.setdefault(link_id, [])
        hist.append(float(capacity_bps))
        if len(hist) > HISTORY_LEN:
            hist.pop(0)
        avg = sum(hist) / len(hist)
        link["capacity_bps"] = float(capacity_bps)
        link["avg_capacity_bps"] = avg
        link["last_csi_seen"] = int(ts)
        link["alerts"]["stale"] = False
    logger.info("CSI update link=%s capacity=%.1f avg=%.1f ts=%s", link_id, capacity_bps, avg, ts)
    return avg


def set_allocation(link_id: str, budget: int, allocation: Dict[str, int], bitrate_bps: float) -> None:
    with _lock:
        link = _state.setdefault(link_id, _blank())
        link["budget"] = int(budget)
        link["allocation"] = dict(allocation)
        link["bitrate_bps"] = float(bitrate_bps)


def update_ack(link_id: str, source: str, k: int, ts: int) -> None:
    with _lock:
        link = _state.setdefault(link_id, _blank())
        link["acks"][source] = {"k": int(k), "ts": int(ts)}
    logger.debug("Source ack link=%s source=%s k=%s", link_id, source, k)


def get_link(link_id: str) -> Optional[dict]:
    with _lock:
        link = _state.get(link_id)
        return copy.deepcopy(link) if link is not None else None


def get_snapshot() -> dict:
    with _lock:
        return copy.deepcopy(_state)


def mark_stale(period_sec: float, now: Optional[float] = None) -> List[str]:
    """Flag links with no CSI for more than two periods; returns the stale ids."""
    now = time.time() if now is None else now
    stale = []
    with _lock:
        for link_id, link in _state.items():
            offline = (now - link["last_csi_seen"]) > 2 * period_sec
            link["alerts"]["stale"] = offline
            if offline:
                stale.append(link_id)
    for link_id in stale:
        logger.warning("No CSI for link=%s within %.1fs", link_id, 2 * period_sec)
    return stale


def run_watchdog(period_sec: float, stop: threading.Event) -> threading.Thread:
    def _loop():
        while not stop.wait(period_sec):
            mark_stale(period_sec)

    th = threading.Thread(target=_loop, name="csi_watchdog", daemon=True)
    th.start()
    return th
