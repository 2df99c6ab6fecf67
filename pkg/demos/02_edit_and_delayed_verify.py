"""
Declared edits and delayed verification
=======================================

An editor trims a clip, converts it to grayscale and quantizes it. The edit
list is signed and published next to the edited video. A viewer holding the
original chain replays the list and compares hashes.
"""

import numpy as np

from frameprov import KeyPair, KeyStore, record
from frameprov.core import Frame, write_fchain
from frameprov.crypto import sha256
from frameprov.edits import apply_edits, apply_filter, write_fvid
from frameprov.verify import delayed_verify
from frameprov.vesl import Compression, EditList, FilterSpec, RangeDeletion, VideoFilter, canonicalize, sign_vesl

rng = np.random.default_rng(1)
device, editor = KeyPair.generate(rng.bytes), KeyPair.generate(rng.bytes)
store = KeyStore()
store.register(device.public_key, "device", "Field Camera 7", 1)
store.register(editor.public_key, "editor", "Night Desk", 2)

frames = [Frame.from_array(rng.integers(0, 256, (24, 32, 3), dtype=np.uint8)) for _ in range(30)]
source = record(device, frames, fps=(30, 1))

# the edit list is bound to the exact bytes of the source file
edits = EditList(
    (
        RangeDeletion(0, 4),
        VideoFilter((FilterSpec("grayscale", None, None, {}),)),
        Compression("quant8", {"q": "16"}),
    ),
    source_hash=sha256(write_fchain(source)),
)
vesl = canonicalize(edits)
print(vesl.decode())
signature = sign_vesl(vesl, editor)

edited = apply_edits(source, edits)
print(f"edited video: {len(edited)} frames")

report = delayed_verify(source, [(vesl, signature)], write_fvid(edited), store)
print("honest publication:", report.verdict)

# brighten one frame without declaring it
sneaky = apply_filter(edited, "brightness", 3, 3, {"offset": "1"})
report = delayed_verify(source, [(vesl, signature)], write_fvid(sneaky), store)
print("undeclared edit:", report.verdict, report.failures)
