"""Minimal PNG support: IHDR dimension parsing and deterministic encoding.

The stub service only needs image dimensions from requests and must emit
byte-stable mask PNGs, so a tiny codec keeps the sidecar free of image
dependencies.
"""
from __future__ import annotations

import struct
import zlib

SIGNATURE = b"\x89PNG\r\n\x1a\n"


class PngError(ValueError):
    pass


def read_dimensions(blob: bytes):
    """(width, height) from the IHDR chunk; raises PngError on malformed data."""
    if len(blob) < 24 or not blob.startswith(SIGNATURE):
        raise PngError("not a PNG stream")
    length, chunk_type = struct.unpack(">I4s", blob[8:16])
    if chunk_type != b"IHDR" or length < 13:
        raise PngError("missing IHDR chunk")
    width, height = struct.unpack(">II", blob[16:24])
    if width == 0 or height == 0:
        raise PngError("empty image")
    return width, height


def _chunk(chunk_type: bytes, data: bytes) -> bytes:
    return (struct.pack(">I", len(data)) + chunk_type + data
            + struct.pack(">I", zlib.crc32(chunk_type + data)))


def encode(rows, width: int, height: int, channels: int = 1) -> bytes:
    """Encode 8-bit grayscale (channels=1) or RGB (channels=3) pixel rows.

    ``rows`` is an iterable of ``height`` byte strings, each of
    ``width * channels`` bytes.  Output is deterministic (fixed zlib level,
    no filtering).
    """
    color_type = 0 if channels == 1 else 2
    header = struct.pack(">IIBBBBB", width, height, 8, color_type, 0, 0, 0)
    raw = b"".join(b"\x00" + row for row in rows)
    if len(raw) != height * (1 + width * channels):
        raise PngError("row data does not match declared dimensions")
    return (SIGNATURE + _chunk(b"IHDR", header)
            + _chunk(b"IDAT", zlib.compress(raw, 9)) + _chunk(b"IEND", b""))


def encode_mask(width: int, height: int, box) -> bytes:
    """Grayscale PNG with 255 inside the (x0, y0, x1, y1) box, 0 elsewhere."""
    x0, y0, x1, y1 = box
    rows = []
    for y in range(height):
        if y0 <= y < y1:
            rows.append(b"\x00" * x0 + b"\xff" * (x1 - x0) + b"\x00" * (width - x1))
        else:
            rows.append(b"\x00" * width)
    return encode(rows, width, height, channels=1)
