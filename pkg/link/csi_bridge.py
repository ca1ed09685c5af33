# link/csi_bridge.py

from __future__ import annotations

import logging
import math
import re
import time

from link import link_state as ls

logger = logging.getLogger(__name__)

CSI_TOPIC = "links/+/csi"
CSI_RE = re.compile(r"^links/([^/]+)/csi$")


def on_csi_message(topic: str, payload: dict) -> None:
    match = CSI_RE.match(topic)
    if not match:
        return
    link_id = match.group(1)
    try:
        capacity = float(payload.get("capacity_bps"))
        if not math.isfinite(capacity) or capacity < 0:
            raise ValueError(capacity)
    except (TypeError, ValueError):
        logger.warning("Bad capacity on %s payload=%s, using 0", topic, payload)
        capacity = 0.0
    try:
        ts = int(payload.get("ts") or time.time())
    except (TypeError, ValueError):
        ts = int(time.time())
    ls.update_capacity(link_id, capacity, ts)


def wire(mqtt_client) -> None:
    mqtt_client.subscribe(CSI_TOPIC, on_csi_message)
    logger.info("CSI bridge listening on %s", CSI_TOPIC)
