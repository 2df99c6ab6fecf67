"""Deterministic replay of declared edits on the content frames of a chain.

Everything in the replay path is integer arithmetic with explicit floor
rounding, so any conforming implementation produces byte-identical output.
The edited result is stored as an ``.fvid`` container whose SHA-256 is the
video hash compared during delayed verification.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import FrameChain, Frame, read_container, write_container
from .crypto import sha256
from .errors import (
    DimensionError,
    EditError,
    EmptyResultError,
    FrameProvError,
    OutOfBoundsError,
    UnsupportedCodecError,
    UnsupportedFilterError,
)
from .vesl import (
    FILTER_PARAMS,
    KNOWN_CODECS,
    QUANT8_STEPS,
    Compression,
    EditList,
    PlaybackSpeed,
    RangeDeletion,
    VideoFilter,
    resolve_range,
    speed_output_length,
)

FVID_MAGIC = b"FVID"


@dataclass(frozen=True)
class VideoBuffer:
    width: int
    height: int
    fps_num: int
    fps_den: int
    frames: tuple[Frame, ...] = field(repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "frames", tuple(self.frames))
        for i, f in enumerate(self.frames):
            if (f.width, f.height) != (self.width, self.height):
                raise DimensionError(f"frame {i} is {f.width}x{f.height}, buffer is {self.width}x{self.height}")

    def __len__(self) -> int:
        return len(self.frames)

    def with_frames(self, frames) -> VideoBuffer:
        return replace(self, frames=tuple(frames))


def extract_content(chain: FrameChain) -> VideoBuffer:
    return VideoBuffer(chain.width, chain.height, chain.fps_num, chain.fps_den, chain.content)


def write_fvid(buf: VideoBuffer) -> bytes:
    return write_container(FVID_MAGIC, buf.width, buf.height, buf.fps_num, buf.fps_den, buf.frames)


def read_fvid(data: bytes) -> VideoBuffer:
    width, height, _, fps_num, fps_den, frames = read_container(data, FVID_MAGIC)
    return VideoBuffer(width, height, fps_num, fps_den, tuple(Frame(width, height, f) for f in frames))


def video_hash(buf: VideoBuffer) -> bytes:
    return sha256(write_fvid(buf))


def _check_range(buf: VideoBuffer, lo: int, hi: int) -> None:
    if not 0 <= lo <= hi < len(buf):
        raise OutOfBoundsError(f"range {lo}..{hi} is outside 0..{len(buf) - 1}")


# -- frame-count edits ---------------------------------------------------------


def apply_range_deletion(buf: VideoBuffer, from_frame: int, to_frame: int) -> VideoBuffer:
    _check_range(buf, from_frame, to_frame)
    kept = buf.frames[:from_frame] + buf.frames[to_frame + 1:]
    if not kept:
        raise EmptyResultError("deletion would remove every frame")
    return buf.with_frames(kept)


def speed_source_indices(length: int, factor_num: int, factor_den: int) -> list[int]:
    """Region-relative source index for each output frame of a speed change."""
    return [j * factor_num // factor_den
            for j in range(speed_output_length(length, factor_num, factor_den))]


def apply_speed_change(buf: VideoBuffer, factor_num: int, factor_den: int,
                       from_frame: int | None = None, to_frame: int | None = None) -> VideoBuffer:
    """Resample a region to ``ceil(L * den / num)`` frames by nearest-earlier pick.

    The framerate is unchanged: a 2/1 factor halves the region's frame count.
    """
    if factor_num <= 0 or factor_den <= 0:
        raise EditError(f"speed factor must be positive, got {factor_num}/{factor_den}")
    lo, hi = resolve_range(from_frame, to_frame, len(buf))
    _check_range(buf, lo, hi)
    region = buf.frames[lo:hi + 1]
    resampled = tuple(region[i] for i in speed_source_indices(len(region), factor_num, factor_den))
    return buf.with_frames(buf.frames[:lo] + resampled + buf.frames[hi + 1:])


# -- pixel filters ------------------------------------------------------------


def grayscale(pixels: np.ndarray) -> np.ndarray:
    wide = pixels.astype(np.uint32)
    y = (77 * wide[..., 0] + 150 * wide[..., 1] + 29 * wide[..., 2]) >> 8
    return np.repeat(y[..., None], 3, axis=2).astype(np.uint8)


def brightness(pixels: np.ndarray, offset: int) -> np.ndarray:
    return np.clip(pixels.astype(np.int16) + offset, 0, 255).astype(np.uint8)


def blackout(pixels: np.ndarray, x: int, y: int, w: int, h: int) -> np.ndarray:
    height, width, _ = pixels.shape
    if x < 0 or y < 0 or w < 1 or h < 1 or x + w > width or y + h > height:
        raise EditError(f"blackout rectangle ({x},{y},{w},{h}) is outside the {width}x{height} frame")
    out = pixels.copy()
    out[y:y + h, x:x + w] = 0
    return out


def boxblur(pixels: np.ndarray, radius: int) -> np.ndarray:
    """Mean over the (2r+1)^2 window, edges clamped, floor division."""
    if radius < 1:
        raise EditError(f"boxblur radius must be >= 1, got {radius}")
    side = 2 * radius + 1
    padded = np.pad(pixels.astype(np.int64), ((radius, radius), (radius, radius), (0, 0)), mode="edge")
    table = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1, 3), dtype=np.int64)
    table[1:, 1:] = padded.cumsum(0).cumsum(1)
    h, w, _ = pixels.shape
    total = (table[side:side + h, side:side + w] - table[:h, side:side + w]
             - table[side:side + h, :w] + table[:h, :w])
    return (total // (side * side)).astype(np.uint8)


def _filter_fn(filter_type: str, params: dict):
    try:
        p = {k: int(params[k]) for k in FILTER_PARAMS[filter_type]}
    except KeyError:
        raise UnsupportedFilterError(f"filter {filter_type!r} is not supported") from None
    except ValueError as exc:
        raise EditError(f"bad {filter_type} parameters: {exc}") from None
    if set(params) != set(FILTER_PARAMS[filter_type]):
        raise EditError(f"{filter_type} takes parameters {list(FILTER_PARAMS[filter_type])}")
    if filter_type == "grayscale":
        return grayscale
    if filter_type == "brightness":
        if not -255 <= p["offset"] <= 255:
            raise EditError(f"brightness offset {p['offset']} outside [-255, 255]")
        return lambda px: brightness(px, p["offset"])
    if filter_type == "blackout":
        return lambda px: blackout(px, p["x"], p["y"], p["w"], p["h"])
    return lambda px: boxblur(px, p["radius"])


def apply_filter(buf: VideoBuffer, filter_type: str, from_frame: int | None,
                 to_frame: int | None, type_params: dict | None = None) -> VideoBuffer:
    fn = _filter_fn(filter_type, type_params or {})
    lo, hi = resolve_range(from_frame, to_frame, len(buf))
    _check_range(buf, lo, hi)
    frames = list(buf.frames)
    for i in range(lo, hi + 1):
        frames[i] = Frame.from_array(fn(frames[i].to_array()))
    return buf.with_frames(frames)


# -- compression --------------------------------------------------------------


def quant8_table(q: int) -> np.ndarray:
    v = np.arange(256, dtype=np.int32)
    return np.minimum(255, q * (v // q) + q // 2).astype(np.uint8)


def apply_compression(buf: VideoBuffer, algorithm: str, params: dict | None = None) -> VideoBuffer:
    params = params or {}
    if algorithm == "none":
        if params:
            raise EditError("compression 'none' takes no parameters")
        return buf
    if algorithm == "quant8":
        try:
            q = int(params["q"])
        except (KeyError, ValueError):
            raise EditError("quant8 needs an integer parameter 'q'") from None
        if q not in QUANT8_STEPS or set(params) != {"q"}:
            raise EditError(f"quant8 takes only q in {QUANT8_STEPS}")
        table = quant8_table(q)
        return buf.with_frames(
            Frame(f.width, f.height, table[np.frombuffer(f.pixels, dtype=np.uint8)].tobytes())
            for f in buf.frames
        )
    if algorithm in KNOWN_CODECS:
        raise UnsupportedCodecError(f"codec {algorithm!r} is recognised but cannot be replayed bit-exactly")
    raise UnsupportedCodecError(f"unknown codec {algorithm!r}")


# -- pipelines ------------------------------------------------------------------


def replay(buf: VideoBuffer, edit_list: EditList) -> VideoBuffer:
    """Apply each edit in order; indices are read against the current buffer."""
    for i, edit in enumerate(edit_list.edits):
        try:
            if isinstance(edit, RangeDeletion):
                buf = apply_range_deletion(buf, edit.from_frame, edit.to_frame)
            elif isinstance(edit, PlaybackSpeed):
                buf = apply_speed_change(buf, edit.factor_num, edit.factor_den,
                                         edit.from_frame, edit.to_frame)
            elif isinstance(edit, VideoFilter):
                for spec in edit.filters:
                    buf = apply_filter(buf, spec.filter_type, spec.from_frame, spec.to_frame,
                                       spec.type_params)
            elif isinstance(edit, Compression):
                buf = apply_compression(buf, edit.algorithm, edit.algorithm_params)
            else:
                raise EditError(f"unknown edit {edit!r}")
        except EditError as exc:
            raise type(exc)(str(exc), edit_index=i) from None
        except FrameProvError as exc:
            raise EditError(str(exc), edit_index=i) from None
    return buf


def apply_edits(chain: FrameChain, edit_list: EditList) -> VideoBuffer:
    return replay(extract_content(chain), edit_list)
