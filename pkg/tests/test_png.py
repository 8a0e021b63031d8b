import io
import struct
import zlib

import numpy as np
import pytest

PIL_Image = pytest.importorskip("PIL.Image")

from noiseprobe.image import Image
from noiseprobe.png import encode_png

from conftest import rand_image


def decode_with_pil(data: bytes) -> np.ndarray:
    with PIL_Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGB"))


def test_signature():
    data = encode_png(Image.constant(3, 2, (1, 2, 3)))
    assert data[:8] == bytes([0x89, 0x50, 0x4E, 0x47, 0x0D, 0x0A, 0x1A, 0x0A])


def test_ihdr_fields_via_independent_parse():
    data = encode_png(Image.constant(1, 1, (255, 0, 0)))
    # IHDR is the first chunk right after the signature
    length, kind = struct.unpack(">I4s", data[8:16])
    assert kind == b"IHDR" and length == 13
    w, h, depth, color_type, comp, filt, interlace = struct.unpack(
        ">IIBBBBB", data[16:29]
    )
    assert (w, h, depth, color_type) == (1, 1, 8, 2)
    assert (comp, filt, interlace) == (0, 0, 0)


def test_chunk_crcs_are_valid():
    data = encode_png(Image.constant(5, 4, (9, 9, 9)))
    pos = 8
    kinds = []
    while pos < len(data):
        length, kind = struct.unpack(">I4s", data[pos : pos + 8])
        payload = data[pos + 8 : pos + 8 + length]
        (crc,) = struct.unpack(">I", data[pos + 8 + length : pos + 12 + length])
        assert crc == zlib.crc32(payload, zlib.crc32(kind))
        kinds.append(kind)
        pos += 12 + length
    assert kinds == [b"IHDR", b"IDAT", b"IEND"]


def test_idat_is_stored_deflate_over_filter0_scanlines(rng):
    img = rand_image(rng, 7, 5)
    data = encode_png(img)
    # pull the IDAT payload
    pos = 8
    idat = b""
    while pos < len(data):
        length, kind = struct.unpack(">I4s", data[pos : pos + 8])
        if kind == b"IDAT":
            idat = data[pos + 8 : pos + 8 + length]
        pos += 12 + length
    # stored blocks only: every block header has BTYPE == 00
    assert idat[0:2] == b"\x78\x01"
    raw = zlib.decompress(idat)
    body = idat[2:-4]
    p = 0
    while True:
        btype = body[p]
        assert btype in (0, 1)  # BFINAL bit only; BTYPE bits must be 0
        ln = struct.unpack("<H", body[p + 1 : p + 3])[0]
        p += 5 + ln
        if btype & 1:
            break
    # filter byte 0 on every scanline, then the raster
    rows = np.frombuffer(raw, dtype=np.uint8).reshape(img.height, 1 + img.width * 3)
    assert (rows[:, 0] == 0).all()
    assert np.array_equal(rows[:, 1:].reshape(img.height, img.width, 3), img.pixels)


def test_pil_round_trip_1x1_red():
    img = Image.constant(1, 1, (255, 0, 0))
    assert np.array_equal(decode_with_pil(encode_png(img)), img.pixels)


def test_pil_round_trip_64x64_random(rng):
    img = rand_image(rng, 64, 64)
    decoded = decode_with_pil(encode_png(img))
    assert decoded.shape == (64, 64, 3)
    assert np.array_equal(decoded, img.pixels)


def test_pil_round_trip_many_sizes(rng):
    for _ in range(12):
        w, h = int(rng.integers(1, 90)), int(rng.integers(1, 90))
        img = rand_image(rng, w, h)
        assert np.array_equal(decode_with_pil(encode_png(img)), img.pixels)


def test_large_image_splits_stored_blocks(rng):
    # raster > 65535 bytes forces multiple stored blocks
    img = rand_image(rng, 200, 120)
    assert np.array_equal(decode_with_pil(encode_png(img)), img.pixels)


@pytest.mark.parametrize(
    "w,h",
    [
        (28, 771),  # scanline bytes total exactly 65535: single full block
        (5, 4096),  # exactly 65536: a full block plus a 1-byte final block
    ],
)
def test_stored_block_boundaries(rng, w, h):
    img = rand_image(rng, w, h)
    assert h * (1 + 3 * w) in (65535, 65536)
    assert np.array_equal(decode_with_pil(encode_png(img)), img.pixels)


def test_determinism(rng):
    img = rand_image(rng, 20, 20)
    assert encode_png(img) == encode_png(img)
