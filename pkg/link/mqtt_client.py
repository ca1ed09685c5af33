"""paho-mqtt wrapper for the feedback service: JSON payloads, wildcard routing, auto-reconnect."""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass
from typing import Callable, List

import paho.mqtt.client as mqtt

logger = logging.getLogger(__name__)

JsonCallback = Callable[[str, dict], None]


@dataclass
class _Subscription:
    topic: str
    callback: JsonCallback


class MqttClient:
    """Routes each JSON message to every callback whose pattern matches its topic."""

    def __init__(self, client_id: str, host: str = "localhost", port: int = 1883, keepalive: int = 60, qos: int = 1):
        self.client = mqtt.Client(client_id=client_id, clean_session=True)
        self.client.on_connect = self._on_connect
        self.client.on_disconnect = self._on_disconnect
        self.client.on_message = self._on_message
        self.host, self.port, self.keepalive, self.qos = host, port, keepalive, qos
        self.dropped = 0
        self._subs: List[_Subscription] = []
        self._lock = threading.Lock()
        self._connected = threading.Event()

    # ------------------------------------------------------------------ paho callbacks
    def _on_connect(self, *_):
        self._connected.set()
        with self._lock:
            patterns = sorted({s.topic for s in self._subs})
        for topic in patterns:
            self.client.subscribe(topic, qos=self.qos)

    def _on_disconnect(self, _client, _userdata, rc):
        self._connected.clear()
        if rc == 0:
            return
        logger.warning("MQTT connection lost rc=%s, reconnecting", rc)
        while not self._connected.is_set():
            try:
                time.sleep(2)
                self.client.reconnect()
                logger.info("Reconnected to MQTT broker at %s:%s", self.host, self.port)
                return
            except Exception:
                time.sleep(2)

    def _on_message(self, _client, _userdata, msg):
        self.dispatch(msg.topic, msg.payload)

    def dispatch(self, topic: str, raw: bytes) -> int:
        """Decode one message and run the matching callbacks; returns how many ran."""
        with self._lock:
            callbacks = [s.callback for s in self._subs if mqtt.topic_matches_sub(s.topic, topic)]
        if not callbacks:
            return 0
        try:
            payload = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, ValueError):
            self.dropped += 1
            logger.warning("MQTT dropped malformed payload topic=%s dropped=%d", topic, self.dropped)
            return 0
        if not isinstance(payload, dict):
            self.dropped += 1
            logger.warning("MQTT dropped non-object payload topic=%s dropped=%d", topic, self.dropped)
            return 0
        for cb in callbacks:
            try:
                cb(topic, payload)
            except Exception as exc:
                logger.exception("MQTT callback error topic=%s: %s", topic, exc)
        return len(callbacks)

    # ------------------------------------------------------------------ API
    def connect(self) -> None:
        self.client.reconnect_delay_set(min_delay=2, max_delay=30)
        self.client.loop_start()
        try:
            self.client.connect_async(self.host, self.port, self.keepalive)
        except Exception as exc:
            logger.warning("Initial MQTT connection failed: %s", exc)
        else:
            logger.info("Connecting to MQTT broker at %s:%s", self.host, self.port)

    def wait_connected(self, timeout: float = 10.0) -> bool:
        return self._connected.wait(timeout)

    def subscribe(self, topic: str, callback: JsonCallback) -> None:
        with self._lock:
            self._subs.append(_Subscription(topic=topic, callback=callback))
        self.client.subscribe(topic, qos=self.qos)
        logger.info("Subscribed to %s", topic)

    def publish_json(self, topic: str, obj: dict, retain: bool = False) -> None:
        payload = json.dumps(obj, sort_keys=True)
        logger.debug("Publishing to %s payload=%s", topic, payload)
        self.client.publish(topic, payload, qos=self.qos, retain=retain)

    def disconnect(self) -> None:
        self.client.loop_stop()
        self.client.disconnect()
