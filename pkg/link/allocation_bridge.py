# link/allocation_bridge.py

from __future__ import annotations

import logging
import re
import time

from link import link_state as ls

logger = logging.getLogger(__name__)

ACK_TOPIC = "links/+/sources/+/state"
ACK_RE = re.compile(r"^links/([^/]+)/sources/([^/]+)/state$")


def alloc_topic(link_id: str, source: str) -> str:
    return f"links/{link_id}/sources/{source}/alloc"


def on_source_ack(topic: str, payload: dict) -> None:
    """Source encoders echo the component count they switched to."""
    match = ACK_RE.match(topic)
    if not match:
        return
    try:
        k = int(payload.get("k"))
    except (TypeError, ValueError):
        logger.warning("Bad ack on %s payload=%s", topic, payload)
        return
    ls.update_ack(match.group(1), match.group(2), k, int(payload.get("ts") or time.time()))


def send_allocation(mqtt_client, link_id: str, source: str, k: int, budget: int, bitrate_bps: float) -> dict:
    payload = {"k": int(k), "budget": int(budget), "bitrate_bps": float(bitrate_bps), "ts": int(time.time())}
    logger.info("Allocation -> link=%s source=%s k=%d budget=%d", link_id, source, k, budget)
    mqtt_client.publish_json(alloc_topic(link_id, source), payload, retain=True)
    return payload


def wire(mqtt_client) -> None:
    mqtt_client.subscribe(ACK_TOPIC, on_source_ack)
    logger.info("Allocation bridge listening on %s", ACK_TOPIC)
