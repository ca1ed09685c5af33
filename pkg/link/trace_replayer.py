"""Replays a capacity trace as CSI reports and echoes allocation acks for each source."""

from __future__ import annotations

import logging
import os
import threading
import time
from typing import Dict, Optional

from channel.trace import ChannelTrace, read_trace
from link.mqtt_client import MqttClient
from logging_setup import configure_logging

logger = logging.getLogger("link.TraceReplayer")

CONNECT_WAIT_SEC = 5.0


class TraceReplayer:
    def __init__(
        self,
        mqtt_host: str,
        mqtt_port: int,
        link_id: str,
        trace: ChannelTrace,
        loop_sec: Optional[float] = None,
        mqtt: Optional[MqttClient] = None,
    ):
        if not len(trace):
            raise ValueError("cannot replay an empty capacity trace")
        self.mqtt_host = mqtt_host
        self.mqtt_port = mqtt_port
        self.link_id = link_id
        self.trace = trace
        self.loop_sec = loop_sec
        self._mqtt = mqtt or MqttClient(client_id=f"trace_replayer_{link_id}", host=mqtt_host, port=mqtt_port)
        self._acked: Dict[str, int] = {}
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self.published = 0

    # ------------------------------------------------------------------ setup
    def start(self) -> None:
        logging.getLogger("paho").setLevel(logging.WARNING)
        self._mqtt.connect()
        self._mqtt.subscribe(f"links/{self.link_id}/sources/+/alloc", self._on_allocation)
        logger.info("Replayer connected to MQTT %s:%s link=%s", self.mqtt_host, self.mqtt_port, self.link_id)

    # ------------------------------------------------------------------ allocation callback
    def _on_allocation(self, topic: str, payload: dict) -> None:
        parts = topic.split("/")
        if len(parts) < 5:
            return
        source = parts[3]
        try:
            k = int(payload.get("k"))
        except (TypeError, ValueError):
            logger.warning("Bad allocation on %s payload=%s", topic, payload)
            return
        with self._lock:
            self._acked[source] = k
        self._mqtt.publish_json(f"links/{self.link_id}/sources/{source}/state", {"k": k, "ts": int(time.time())})
        logger.info("Source %s switched to k=%d", source, k)

    def acked(self) -> Dict[str, int]:
        with self._lock:
            return dict(self._acked)

    # ------------------------------------------------------------------ replay loop
    def _wait_for(self, index: int) -> float:
        if self.loop_sec:
            return self.loop_sec
        times = self.trace.times
        if index + 1 < len(times):
            return times[index + 1] - times[index]
        # wrap-around: reuse the previous step
        return times[-1] - times[-2] if len(times) > 1 else 1.0

    def publish_sample(self, index: int) -> dict:
        t, capacity = self.trace.samples[index]
        payload = {"capacity_bps": capacity, "ts": int(time.time())}
        self._mqtt.publish_json(f"links/{self.link_id}/csi", payload)
        self.published += 1
        logger.info("CSI link=%s t=%.2f capacity=%.1f", self.link_id, t, capacity)
        return payload

    def run_forever(self) -> None:
        while not self._stop.is_set() and not self._mqtt.wait_connected(CONNECT_WAIT_SEC):
            logger.warning("Broker %s:%s not reachable, holding the trace", self.mqtt_host, self.mqtt_port)
        index = 0
        while not self._stop.is_set():
            self.publish_sample(index)
            if self._stop.wait(self._wait_for(index)):
                break
            index = (index + 1) % len(self.trace)

    def stop(self) -> None:
        self._stop.set()
        self._mqtt.disconnect()


def main() -> None:
    configure_logging()
    mqtt_host = os.getenv("MQTT_HOST", "localhost")
    mqtt_port = int(os.getenv("MQTT_PORT", "1883"))
    link_id = os.getenv("LINK_ID", "room1_uplink")
    loop_sec = float(os.getenv("TRACE_LOOP_SEC", "0")) or None
    trace = read_trace(os.getenv("TRACE_PATH", "config/capacity_trace.csv"))
    replayer = TraceReplayer(mqtt_host, mqtt_port, link_id, trace, loop_sec=loop_sec)
    replayer.start()
    try:
        replayer.run_forever()
    except KeyboardInterrupt:
        replayer.stop()


if __name__ == "__main__":
    main()
