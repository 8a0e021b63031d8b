"""Minimal PNG writer: 8-bit truecolor, stored (uncompressed) deflate blocks.

Write-only by design; it exists so remote HTTP oracles that reject raw
pixmaps can be fed.  The zlib stream is assembled by hand from stored
deflate blocks, so the output bytes are fully determined by the pixels.
Any conformant decoder recovers the raster exactly.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .image import Image

_SIGNATURE = b"\x89PNG\r\n\x1a\n"
_MAX_STORED = 0xFFFF  # stored deflate block payload limit


def _chunk(kind: bytes, payload: bytes) -> bytes:
    crc = zlib.crc32(payload, zlib.crc32(kind))
    return struct.pack(">I", len(payload)) + kind + payload + struct.pack(">I", crc)


def _stored_zlib(raw: bytes) -> bytes:
    """Wrap *raw* in a zlib stream made only of stored deflate blocks."""
    out = bytearray(b"\x78\x01")  # CMF/FLG: 32K window, no preset dict, check ok
    n = len(raw)
    pos = 0
    while True:
        block = raw[pos : pos + _MAX_STORED]
        pos += len(block)
        final = 1 if pos >= n else 0
        out.append(final)  # BFINAL + BTYPE=00
        out += struct.pack("<HH", len(block), len(block) ^ 0xFFFF)
        out += block
        if final:
            break
    out += struct.pack(">I", zlib.adler32(raw))
    return bytes(out)


def encode_png(img: Image) -> bytes:
    """Encode an Image as a standards-conformant truecolor PNG."""
    h, w = img.height, img.width
    # filter type 0 prepended to every scanline
    scan = np.empty((h, 1 + w * 3), dtype=np.uint8)
    scan[:, 0] = 0
    scan[:, 1:] = img.pixels.reshape(h, w * 3)
    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return (
        _SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", _stored_zlib(scan.tobytes()))
        + _chunk(b"IEND", b"")
    )
