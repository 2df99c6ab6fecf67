"""
Snippets and streaming verification
===================================

Snippet signatures let a viewer trust the start of a clip even when a later
part is damaged. The streaming verifier checks links as frames arrive and
ends with the same report the batch verifier gives.
"""

import numpy as np

from frameprov import KeyPair, KeyStore, record, verify_chain
from frameprov.core import Frame, FrameChain
from frameprov.verify import StreamVerifier

rng = np.random.default_rng(2)
device = KeyPair.generate(rng.bytes)
store = KeyStore()
store.register(device.public_key, "device", "Drone 3", 1)

frames = [Frame.from_array(rng.integers(0, 256, (16, 32, 3), dtype=np.uint8)) for _ in range(10)]
chain = record(device, frames, snippet_every=2)

# damage content frame 7
arrays = list(chain.arrays)
px = bytearray(arrays[8].pixels)
px[200] ^= 0xFF
arrays[8] = Frame(chain.width, chain.height, bytes(px))
damaged = FrameChain(chain.width, chain.height, chain.fps_num, chain.fps_den, tuple(arrays))

batch = verify_chain(damaged, store)
print("verdict:", batch.verdict)
for snip in batch.snippets:
    print(f"  snippet after frame {snip['frameIndex']}: {snip['status']}")

# same chain, one frame at a time
sv = StreamVerifier(damaged.genesis, fps=(damaged.fps_num, damaged.fps_den))
print("stream:", [sv.feed(f) for f in damaged.content])
streamed = sv.finalize(damaged.trailer, store)
print("stream report equals batch report:", streamed.to_json() == batch.to_json())
