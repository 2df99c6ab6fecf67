"""Software stand-in for the sensor-side trusted component.

A :class:`RecordingSession` turns raw sensor frames into a :class:`FrameChain`:

1. ``start`` builds the genesis frame from the device key and metadata;
2. ``feed`` overwrites row 0 of each raw frame with the digest of the
   previously accumulated array;
3. ``stop`` signs the digest of the last content frame together with the
   frame count and framerate, plus one snippet signature per marked index,
   and appends the trailer frame.

The device key is injected by the caller; the session never generates keys.
Hardware custody and tamper evidence are not simulated.
"""

from __future__ import annotations

import enum

from .core import (
    Frame,
    FrameChain,
    GenesisMetadata,
    SnippetSignature,
    TrailerMetadata,
    _require_chain_dims,
    build_genesis,
    build_trailer,
    encode_hash_row,
    final_message,
    frame_digest,
    snippet_message,
    trailer_size,
)
from .crypto import KeyPair
from .errors import CapacityError, DimensionError, StateError, StructureError


class SessionState(enum.Enum):
    INITIALIZED = "initialized"
    RECORDING = "recording"
    FINALIZED = "finalized"


class RecordingSession:
    """Single-owner recording state machine. Not safe for concurrent use."""

    def __init__(self, keypair: KeyPair, genesis: GenesisMetadata, width: int, height: int) -> None:
        _require_chain_dims(width, height)
        if trailer_size(0) > 3 * width * height:
            raise CapacityError(
                f"{width}x{height} frames cannot hold the {trailer_size(0)}-byte trailer payload"
            )
        if genesis.device_public_key != keypair.public_key:
            raise StructureError("genesis device key does not match the session key pair")
        self.state = SessionState.INITIALIZED
        self.width = width
        self.height = height
        self._keypair = keypair
        self.genesis = genesis
        self._arrays: list[Frame] = []
        self._digests: list[bytes] = []
        self.pending_snippets: list[int] = []

    @property
    def last_digest(self) -> bytes:
        return self._digests[-1]

    @property
    def content_count(self) -> int:
        return max(len(self._arrays) - 1, 0)

    @property
    def arrays(self) -> tuple[Frame, ...]:
        return tuple(self._arrays)

    def _require(self, state: SessionState, action: str) -> None:
        if self.state is not state:
            raise StateError(f"cannot {action} in state {self.state.value}")

    def _accumulate(self, frame: Frame) -> None:
        digest = frame_digest(frame)
        self._arrays.append(frame)
        self._digests.append(digest)

    def start(self) -> None:
        self._require(SessionState.INITIALIZED, "start")
        genesis_frame = build_genesis(self.genesis, self.width, self.height)
        self._accumulate(genesis_frame)
        self.state = SessionState.RECORDING

    def feed(self, raw: Frame) -> Frame:
        self._require(SessionState.RECORDING, "feed")
        if (raw.width, raw.height) != (self.width, self.height):
            raise DimensionError(
                f"frame is {raw.width}x{raw.height}, session records {self.width}x{self.height}"
            )
        chained = raw.with_row0(encode_hash_row(self.last_digest, self.width))
        self._accumulate(chained)
        return chained

    def mark_snippet(self) -> int:
        self._require(SessionState.RECORDING, "mark a snippet")
        if self.content_count == 0:
            raise StateError("no content frames to mark yet")
        index = self.content_count - 1
        if self.pending_snippets and self.pending_snippets[-1] >= index:
            raise StateError(f"content index {index} is already marked")
        if trailer_size(len(self.pending_snippets) + 1) > 3 * self.width * self.height:
            raise CapacityError("trailer frame has no room for another snippet signature")
        self.pending_snippets.append(index)
        return index

    def stop(self, fps_num: int, fps_den: int) -> FrameChain:
        self._require(SessionState.RECORDING, "stop")
        if self.content_count == 0:
            raise StateError("cannot stop a recording with no content frames")
        if fps_den < 1 or fps_num < 1:
            raise StructureError(f"invalid framerate {fps_num}/{fps_den}")
        count = self.content_count
        snippets = tuple(
            SnippetSignature(k, self._keypair.sign(snippet_message(self._digests[k + 1], k)))
            for k in self.pending_snippets
        )
        signature = self._keypair.sign(final_message(self.last_digest, count, fps_num, fps_den))
        trailer = build_trailer(
            TrailerMetadata(count, fps_num, fps_den, signature, snippets), self.width, self.height
        )
        self._arrays.append(trailer)
        self.state = SessionState.FINALIZED
        return FrameChain(self.width, self.height, fps_num, fps_den, tuple(self._arrays))


def tee_start(keypair: KeyPair, sensor_id: str, timestamp: int, sequence_number: int,
              width: int, height: int, anchor_hash: bytes | None = None) -> RecordingSession:
    genesis = GenesisMetadata(keypair.public_key, timestamp, sequence_number, sensor_id, anchor_hash)
    session = RecordingSession(keypair, genesis, width, height)
    session.start()
    return session


def tee_feed(session: RecordingSession, raw: Frame) -> Frame:
    return session.feed(raw)


def tee_mark_snippet(session: RecordingSession) -> int:
    return session.mark_snippet()


def tee_stop(session: RecordingSession, fps_num: int, fps_den: int) -> FrameChain:
    return session.stop(fps_num, fps_den)


def record(keypair: KeyPair, frames, *, fps: tuple[int, int] = (30, 1), sensor_id: str = "",
           timestamp: int = 0, sequence_number: int = 0, anchor_hash: bytes | None = None,
           snippet_every: int | None = None) -> FrameChain:
    """Record an iterable of raw frames into a chain in one call.

    With ``snippet_every=N`` a snippet is marked after every N-th frame
    (content indices N-1, 2N-1, ...).
    """
    session = None
    for i, frame in enumerate(frames):
        if session is None:
            session = tee_start(keypair, sensor_id, timestamp, sequence_number,
                                frame.width, frame.height, anchor_hash)
        session.feed(frame)
        if snippet_every and (i + 1) % snippet_every == 0:
            session.mark_snippet()
    if session is None:
        raise StateError("cannot record an empty frame sequence")
    return session.stop(*fps)
