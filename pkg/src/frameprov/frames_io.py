"""Frame sources: binary PPM (P6, maxval 255) files and raw RGB24 streams."""

from __future__ import annotations

import os
import re
from pathlib import Path
from typing import Iterator

from .core import Frame
from .errors import ParseError, StructureError

_PPM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*([^\s#]+)")


def read_ppm(data: bytes) -> Frame:
    pos = 0
    fields = []
    for _ in range(4):
        m = _PPM_TOKEN.match(data, pos)
        if not m:
            raise ParseError("truncated PPM header")
        fields.append(m.group(1))
        pos = m.end()
    magic, width, height, maxval = fields
    if magic != b"P6":
        raise ParseError(f"only binary PPM (P6) is supported, got {magic!r}")
    try:
        width, height, maxval = int(width), int(height), int(maxval)
    except ValueError:
        raise ParseError("non-numeric PPM header field") from None
    if maxval != 255:
        raise ParseError(f"only maxval 255 is supported, got {maxval}")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise ParseError("missing whitespace after PPM header")
    pixels = data[pos + 1:]
    if len(pixels) != 3 * width * height:
        raise ParseError(f"PPM body is {len(pixels)} bytes, expected {3 * width * height}")
    return Frame(width, height, pixels)


def write_ppm(frame: Frame) -> bytes:
    return b"P6\n%d %d\n255\n" % (frame.width, frame.height) + frame.pixels


def ppm_directory(path: str | os.PathLike) -> Iterator[Frame]:
    """Frames from every ``*.ppm`` file in ``path`` in lexicographic filename order."""
    files = sorted(p for p in Path(path).iterdir() if p.suffix.lower() == ".ppm" and p.is_file())
    for p in files:
        yield read_ppm(p.read_bytes())


def raw_rgb_file(path: str | os.PathLike, width: int, height: int) -> Iterator[Frame]:
    size = 3 * width * height
    with open(path, "rb") as fh:
        while True:
            chunk = fh.read(size)
            if not chunk:
                return
            if len(chunk) != size:
                raise StructureError(f"{path}: trailing partial frame of {len(chunk)} bytes")
            yield Frame(width, height, chunk)
