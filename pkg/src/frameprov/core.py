"""Frames, FrameChains, pixel encodings of digests and metadata, and the .fchain container.

A FrameChain is a sequence of ``n >= 3`` equally sized RGB24 frames:

* array 1, the *genesis* frame, is a pure payload frame carrying device metadata;
* arrays 2..n-1 are content frames whose row 0 holds the SHA-256 digest of the
  preceding array (bytes 0..31, rest of the row zero);
* array n, the *trailer* frame, carries the frame count, framerate, snippet
  signatures and the final Ed25519 signature.

All integers in payloads and containers are little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .crypto import DIGEST_SIZE, PUBLIC_KEY_SIZE, SIGNATURE_SIZE, sha256
from .errors import (
    BadMagicError,
    CapacityError,
    DimensionError,
    LengthError,
    OrderingError,
    PaddingError,
    StructureError,
    TruncatedError,
    VersionError,
)

MIN_WIDTH = 11  # ceil(32 / 3) pixels to hold one digest in row 0
MIN_HEIGHT = 2

GENESIS_MAGIC = b"FPGN"
TRAILER_MAGIC = b"FPSG"
FINAL_MESSAGE_TAG = b"FPFN"
SNIPPET_MESSAGE_TAG = b"FPSN"
FCHAIN_MAGIC = b"FCHN"
PAYLOAD_VERSION = 1
CONTAINER_VERSION = 1
MAX_SENSOR_ID_BYTES = 1024

_FCHAIN_HEADER = struct.Struct("<4sHIIQII")
_GENESIS_FIXED = struct.Struct("<4sB32sQQB")
_TRAILER_FIXED = struct.Struct("<4sBQIIH")
_SNIPPET = struct.Struct("<Q64s")
_U16 = struct.Struct("<H")


@dataclass(frozen=True)
class Frame:
    """A W x H RGB24 frame, row-major, one byte per channel in R, G, B order."""

    width: int
    height: int
    pixels: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise DimensionError(f"frame dimensions must be positive, got {self.width}x{self.height}")
        if len(self.pixels) != 3 * self.width * self.height:
            raise StructureError(
                f"{self.width}x{self.height} frame needs {3 * self.width * self.height} bytes, "
                f"got {len(self.pixels)}"
            )

    @classmethod
    def blank(cls, width: int, height: int) -> Frame:
        return cls(width, height, bytes(3 * width * height))

    @classmethod
    def from_array(cls, array: np.ndarray) -> Frame:
        """Build from an ``(height, width, 3)`` uint8 array."""
        array = np.asarray(array)
        if array.ndim != 3 or array.shape[2] != 3:
            raise DimensionError(f"expected (height, width, 3) array, got shape {array.shape}")
        if array.dtype != np.uint8:
            raise StructureError(f"expected uint8 pixels, got {array.dtype}")
        height, width, _ = array.shape
        return cls(width, height, np.ascontiguousarray(array).tobytes())

    def to_array(self) -> np.ndarray:
        """Read-only ``(height, width, 3)`` uint8 view of the pixels."""
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width, 3)

    @property
    def row_size(self) -> int:
        return 3 * self.width

    def row(self, y: int) -> bytes:
        return self.pixels[y * self.row_size:(y + 1) * self.row_size]

    def with_row0(self, row: bytes) -> Frame:
        if len(row) != self.row_size:
            raise StructureError(f"row 0 must be {self.row_size} bytes, got {len(row)}")
        return Frame(self.width, self.height, row + self.pixels[self.row_size:])


def _require_chain_dims(width: int, height: int) -> None:
    if width < MIN_WIDTH or height < MIN_HEIGHT:
        raise DimensionError(
            f"chain frames must be at least {MIN_WIDTH}x{MIN_HEIGHT}, got {width}x{height}"
        )


def frame_digest(frame: Frame) -> bytes:
    """SHA-256 over the frame's complete pixel bytes, row 0 included."""
    return sha256(frame.pixels)


def encode_hash_row(digest: bytes, width: int) -> bytes:
    """Row-0 bytes for a content frame: the digest followed by zeros."""
    if width < MIN_WIDTH:
        raise DimensionError(f"width {width} cannot hold a {DIGEST_SIZE}-byte digest")
    if len(digest) != DIGEST_SIZE:
        raise StructureError(f"digest must be {DIGEST_SIZE} bytes, got {len(digest)}")
    return digest + bytes(3 * width - DIGEST_SIZE)


def decode_hash_row(frame: Frame) -> bytes:
    if frame.width < MIN_WIDTH:
        raise DimensionError(f"width {frame.width} cannot hold a {DIGEST_SIZE}-byte digest")
    return frame.pixels[:DIGEST_SIZE]


# -- genesis and trailer payloads ---------------------------------------------


@dataclass(frozen=True)
class GenesisMetadata:
    device_public_key: bytes
    timestamp: int
    sequence_number: int
    sensor_id: str = ""
    anchor_hash: bytes | None = None
    version: int = PAYLOAD_VERSION

    def __post_init__(self) -> None:
        if len(self.device_public_key) != PUBLIC_KEY_SIZE:
            raise StructureError("device public key must be 32 bytes")
        if self.anchor_hash is not None and len(self.anchor_hash) != DIGEST_SIZE:
            raise StructureError("anchor hash must be 32 bytes")
        if len(self.sensor_id.encode("utf-8")) > MAX_SENSOR_ID_BYTES:
            raise StructureError(f"sensor id exceeds {MAX_SENSOR_ID_BYTES} bytes")
        for name in ("timestamp", "sequence_number"):
            value = getattr(self, name)
            if not 0 <= value < 2**64:
                raise StructureError(f"{name} out of u64 range: {value}")

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "devicePublicKey": self.device_public_key.hex(),
            "timestamp": self.timestamp,
            "sequenceNumber": self.sequence_number,
            "anchorHash": None if self.anchor_hash is None else self.anchor_hash.hex(),
            "sensorId": self.sensor_id,
        }


@dataclass(frozen=True)
class SnippetSignature:
    frame_index: int
    signature: bytes = field(repr=False)


@dataclass(frozen=True)
class TrailerMetadata:
    content_count: int
    fps_num: int
    fps_den: int
    final_signature: bytes = field(repr=False)
    snippets: tuple[SnippetSignature, ...] = ()
    version: int = PAYLOAD_VERSION

    def __post_init__(self) -> None:
        object.__setattr__(self, "snippets", tuple(self.snippets))
        if self.fps_den < 1:
            raise StructureError("fps denominator must be >= 1")
        if len(self.final_signature) != SIGNATURE_SIZE:
            raise StructureError("final signature must be 64 bytes")
        _check_snippet_order([s.frame_index for s in self.snippets], self.content_count)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "contentCount": self.content_count,
            "fpsNum": self.fps_num,
            "fpsDen": self.fps_den,
            "snippets": [s.frame_index for s in self.snippets],
        }


def _check_snippet_order(indices: Sequence[int], content_count: int) -> None:
    for prev, cur in zip(indices, indices[1:]):
        if cur <= prev:
            raise OrderingError(f"snippet indices must be strictly increasing: {prev} then {cur}")
    for index in indices:
        if index >= content_count:
            raise OrderingError(f"snippet index {index} >= content count {content_count}")


def _pad_to_frame(payload: bytes, width: int, height: int) -> Frame:
    _require_chain_dims(width, height)
    capacity = 3 * width * height
    if len(payload) > capacity:
        raise CapacityError(f"payload of {len(payload)} bytes exceeds {width}x{height} frame capacity {capacity}")
    return Frame(width, height, payload + bytes(capacity - len(payload)))


def _check_padding(frame: Frame, end: int) -> None:
    tail = frame.pixels[end:]
    if tail.count(0) != len(tail):
        offset = end + next(i for i, b in enumerate(tail) if b)
        raise PaddingError(f"nonzero padding byte at offset {offset}")


class _Reader:
    def __init__(self, data: bytes) -> None:
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise TruncatedError(f"payload truncated at offset {self.pos} (needed {n} bytes)")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, st: struct.Struct) -> tuple:
        return st.unpack(self.take(st.size))


def serialize_genesis(meta: GenesisMetadata) -> bytes:
    sensor = meta.sensor_id.encode("utf-8")
    out = _GENESIS_FIXED.pack(
        GENESIS_MAGIC, meta.version, meta.device_public_key, meta.timestamp,
        meta.sequence_number, 0 if meta.anchor_hash is None else 1,
    )
    if meta.anchor_hash is not None:
        out += meta.anchor_hash
    return out + _U16.pack(len(sensor)) + sensor


def build_genesis(meta: GenesisMetadata, width: int, height: int) -> Frame:
    return _pad_to_frame(serialize_genesis(meta), width, height)


def parse_genesis(frame: Frame) -> GenesisMetadata:
    reader = _Reader(frame.pixels)
    magic = reader.take(4)
    if magic != GENESIS_MAGIC:
        raise BadMagicError(f"expected genesis magic {GENESIS_MAGIC!r}, got {magic!r}")
    reader.pos = 0
    _, version, key, timestamp, sequence, flag = reader.unpack(_GENESIS_FIXED)
    if version != PAYLOAD_VERSION:
        raise VersionError(f"unsupported genesis version {version}")
    if flag not in (0, 1):
        raise StructureError(f"anchor flag must be 0 or 1, got {flag}")
    anchor = reader.take(DIGEST_SIZE) if flag else None
    (sensor_len,) = reader.unpack(_U16)
    if sensor_len > MAX_SENSOR_ID_BYTES:
        raise StructureError(f"sensor id length {sensor_len} exceeds {MAX_SENSOR_ID_BYTES}")
    raw_sensor = reader.take(sensor_len)
    try:
        sensor = raw_sensor.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise StructureError(f"sensor id is not valid UTF-8: {exc}") from None
    _check_padding(frame, reader.pos)
    return GenesisMetadata(key, timestamp, sequence, sensor, anchor, version)


def serialize_trailer(meta: TrailerMetadata) -> bytes:
    out = _TRAILER_FIXED.pack(
        TRAILER_MAGIC, meta.version, meta.content_count, meta.fps_num, meta.fps_den,
        len(meta.snippets),
    )
    for snip in meta.snippets:
        out += _SNIPPET.pack(snip.frame_index, snip.signature)
    return out + meta.final_signature


def trailer_size(snippet_count: int) -> int:
    """Serialized trailer payload length for a given number of snippets."""
    return _TRAILER_FIXED.size + snippet_count * _SNIPPET.size + SIGNATURE_SIZE


def build_trailer(meta: TrailerMetadata, width: int, height: int) -> Frame:
    return _pad_to_frame(serialize_trailer(meta), width, height)


def parse_trailer(frame: Frame) -> TrailerMetadata:
    reader = _Reader(frame.pixels)
    magic = reader.take(4)
    if magic != TRAILER_MAGIC:
        raise BadMagicError(f"expected trailer magic {TRAILER_MAGIC!r}, got {magic!r}")
    reader.pos = 0
    _, version, count, fps_num, fps_den, n_snippets = reader.unpack(_TRAILER_FIXED)
    if version != PAYLOAD_VERSION:
        raise VersionError(f"unsupported trailer version {version}")
    snippets = [SnippetSignature(*reader.unpack(_SNIPPET)) for _ in range(n_snippets)]
    final = reader.take(SIGNATURE_SIZE)
    _check_padding(frame, reader.pos)
    _check_snippet_order([s.frame_index for s in snippets], count)
    if fps_den < 1:
        raise StructureError("fps denominator must be >= 1")
    return TrailerMetadata(count, fps_num, fps_den, final, tuple(snippets), version)


def final_message(last_digest: bytes, content_count: int, fps_num: int, fps_den: int) -> bytes:
    """Bytes the device signs at stop: tag, digest of array n-1, count and framerate."""
    return FINAL_MESSAGE_TAG + last_digest + struct.pack("<QII", content_count, fps_num, fps_den)


def snippet_message(content_digest: bytes, frame_index: int) -> bytes:
    return SNIPPET_MESSAGE_TAG + content_digest + struct.pack("<Q", frame_index)


# -- chains and the container -------------------------------------------------


@dataclass(frozen=True)
class FrameChain:
    width: int
    height: int
    fps_num: int
    fps_den: int
    arrays: tuple[Frame, ...] = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "arrays", tuple(self.arrays))
        _require_chain_dims(self.width, self.height)
        if len(self.arrays) < 3:
            raise StructureError(f"a chain needs at least 3 arrays, got {len(self.arrays)}")
        if self.fps_den < 1:
            raise StructureError("fps denominator must be >= 1")
        for i, frame in enumerate(self.arrays):
            if (frame.width, frame.height) != (self.width, self.height):
                raise DimensionError(
                    f"array {i} is {frame.width}x{frame.height}, chain is {self.width}x{self.height}"
                )

    @property
    def genesis(self) -> Frame:
        return self.arrays[0]

    @property
    def content(self) -> tuple[Frame, ...]:
        return self.arrays[1:-1]

    @property
    def trailer(self) -> Frame:
        return self.arrays[-1]

    def __len__(self) -> int:
        return len(self.arrays)


def broken_links(arrays: Sequence[Frame]) -> list[int]:
    """Content indices whose row 0 does not encode the digest of the preceding array.

    ``arrays`` is a full chain (genesis first, trailer last). Empty result means
    the hash-chain property holds for every link.
    """
    broken = []
    prev = frame_digest(arrays[0])
    for k, frame in enumerate(arrays[1:-1]):
        if frame.row(0) != encode_hash_row(prev, frame.width):
            broken.append(k)
        prev = frame_digest(frame)
    return broken


def write_fchain(chain: FrameChain) -> bytes:
    return write_container(FCHAIN_MAGIC, chain.width, chain.height, chain.fps_num,
                           chain.fps_den, chain.arrays)


def read_container(data: bytes, magic: bytes) -> tuple[int, int, int, int, int, list[bytes]]:
    """Shared header/body decoder for .fchain and .fvid files.

    Returns ``(width, height, count, fps_num, fps_den, frame_bytes)``.
    """
    if len(data) < _FCHAIN_HEADER.size:
        raise LengthError(f"file shorter than the {_FCHAIN_HEADER.size}-byte header")
    got_magic, version, width, height, count, fps_num, fps_den = _FCHAIN_HEADER.unpack_from(data)
    if got_magic != magic:
        raise BadMagicError(f"expected magic {magic!r}, got {got_magic!r}")
    if version != CONTAINER_VERSION:
        raise VersionError(f"unsupported container version {version}")
    if width == 0 or height == 0:
        raise DimensionError("zero frame dimension in header")
    if fps_den == 0:
        raise StructureError("fps denominator is zero")
    size = 3 * width * height
    expected = _FCHAIN_HEADER.size + count * size
    if len(data) != expected:
        raise LengthError(f"expected {expected} bytes for {count} frames, got {len(data)}")
    body = memoryview(data)[_FCHAIN_HEADER.size:]
    frames = [bytes(body[i * size:(i + 1) * size]) for i in range(count)]
    return width, height, count, fps_num, fps_den, frames


def write_container(magic: bytes, width: int, height: int, fps_num: int, fps_den: int,
                    frames: Iterable[Frame]) -> bytes:
    frames = list(frames)
    header = _FCHAIN_HEADER.pack(magic, CONTAINER_VERSION, width, height, len(frames), fps_num, fps_den)
    return header + b"".join(f.pixels for f in frames)


def read_fchain(data: bytes) -> FrameChain:
    width, height, count, fps_num, fps_den, frames = read_container(data, FCHAIN_MAGIC)
    if count < 3:
        raise StructureError(f"frame_count {count} < 3")
    return FrameChain(width, height, fps_num, fps_den,
                      tuple(Frame(width, height, f) for f in frames))


CONTAINER_HEADER_SIZE = _FCHAIN_HEADER.size
