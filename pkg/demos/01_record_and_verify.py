"""
Record a short clip and verify it
=================================

A simulated camera records 24 frames into a chain. We verify it, then flip
one bit in the middle of the clip and watch the link check catch it.
"""

import numpy as np

from frameprov import KeyPair, KeyStore, record, verify_chain
from frameprov.core import Frame, FrameChain

rng = np.random.default_rng(0)

# a device key, registered the way a newsroom would publish it
device = KeyPair.generate(rng.bytes)
store = KeyStore()
store.register(device.public_key, "device", "Field Camera 7", registered_at=1700000000)

# 24 noisy 64x48 frames stand in for sensor output
frames = [Frame.from_array(rng.integers(0, 256, (48, 64, 3), dtype=np.uint8)) for _ in range(24)]
chain = record(device, frames, fps=(24, 1), sensor_id="cam7", timestamp=1700000100)
print(f"chain holds {len(chain)} arrays: genesis, {len(chain.content)} content, trailer")

report = verify_chain(chain, store)
print(report.render_text())

# flip one bit deep inside content frame 10
arrays = list(chain.arrays)
px = bytearray(arrays[11].pixels)
px[len(px) // 2] ^= 0x01
arrays[11] = Frame(chain.width, chain.height, bytes(px))
tampered = FrameChain(chain.width, chain.height, chain.fps_num, chain.fps_den, tuple(arrays))

report = verify_chain(tampered, store)
print()
print(report.render_text())
print("first broken link:", report.first_broken_link)
