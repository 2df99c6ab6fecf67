import numpy as np
import pytest

from frameprov.core import Frame
from frameprov.crypto import KeyPair
from frameprov.keystore import KeyStore
from frameprov.tee import record


def keypair_from(label: str) -> KeyPair:
    return KeyPair(label.encode().ljust(32, b"\0")[:32])


def random_frames(rng: np.random.Generator, count: int, width: int, height: int) -> list[Frame]:
    return [Frame.from_array(rng.integers(0, 256, (height, width, 3), dtype=np.uint8))
            for _ in range(count)]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def device_key():
    return keypair_from("device-A")


@pytest.fixture
def editor_key():
    return keypair_from("editor-A")


@pytest.fixture
def store(device_key, editor_key):
    ks = KeyStore()
    ks.register(device_key.public_key, "device", "Newsroom A", 1_700_000_000)
    ks.register(editor_key.public_key, "editor", "Desk B", 1_700_000_100)
    return ks


@pytest.fixture
def make_chain(device_key, rng):
    def _make(count=4, width=16, height=11, snippet_every=None, fps=(30, 1), key=None):
        frames = random_frames(rng, count, width, height)
        return record(key or device_key, frames, fps=fps, sensor_id="cam-1",
                      timestamp=1_700_000_500, sequence_number=7, snippet_every=snippet_every)
    return _make
