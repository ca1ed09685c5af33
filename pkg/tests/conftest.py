"""Shared fixtures: tiny codec configs, a small synthetic corpus and an in-process MQTT fake."""

from __future__ import annotations

import json
import threading

import paho.mqtt.client as mqtt
import pytest
import torch

from codec.model import ArchConfig
from data.synth import SynthConfig, synth_corpus
from dsp.stft import StftConfig
from link import link_state


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run desk-scale training tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def stft_cfg() -> StftConfig:
    return StftConfig(fft_size=256, hop=64, window=256)


@pytest.fixture
def tiny_arch() -> ArchConfig:
    return ArchConfig(
        freq_bins=9,
        frames=4,
        freq_proj_hidden=6,
        freq_proj_out=4,
        n_res_blocks=1,
        latent_dim=8,
        conv_channels=3,
        kernel=3,
    )


@pytest.fixture
def small_corpus():
    return synth_corpus(SynthConfig(n_clips=6, seed=3))


@pytest.fixture(autouse=True)
def _fresh_link_state():
    link_state.reset()
    yield
    link_state.reset()


class FakeMqtt:
    """Broker-less MqttClient stand-in; publishes are recorded and routed to local subscribers."""

    def __init__(self, *_, **kwargs):
        self.client_id = kwargs.get("client_id")
        self.published = []
        self.subs = []
        self._connected = threading.Event()

    @property
    def connected(self):
        return self._connected.is_set()

    def connect(self):
        self._connected.set()

    def wait_connected(self, timeout=10.0):
        return self._connected.wait(timeout)

    def disconnect(self):
        self._connected.clear()

    def subscribe(self, topic, callback):
        self.subs.append((topic, callback))

    def publish_json(self, topic, obj, retain=False):
        self.published.append((topic, obj, retain))
        payload = json.loads(json.dumps(obj))
        for pattern, cb in list(self.subs):
            if mqtt.topic_matches_sub(pattern, topic):
                cb(topic, payload)

    def topics(self):
        return [t for t, _, _ in self.published]


@pytest.fixture
def fake_mqtt() -> FakeMqtt:
    return FakeMqtt(client_id="test")


@pytest.fixture
def rng() -> torch.Generator:
    return torch.Generator().manual_seed(1234)


@pytest.fixture
def mqtt_factory():
    return FakeMqtt
