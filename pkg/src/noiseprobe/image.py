"""RGB raster type and bit-exact PPM (P6) file I/O.

PPM is the native working format: uncompressed, byte-exact, trivially
auditable.  Images are 8 bits per channel, three channels, maxval 255 only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class PpmError(ValueError):
    """Raised for malformed PPM input."""


@dataclass(frozen=True, eq=False)
class Image:
    """Immutable width x height RGB raster with uint8 samples.

    ``pixels`` has shape (height, width, 3), row-major, channel order R,G,B.
    The array is frozen (non-writeable) at construction; operations on
    images always return new instances.
    """

    pixels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.asarray(self.pixels)
        if arr.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {arr.dtype}")
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"pixels must have shape (h, w, 3), got {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("width and height must be >= 1")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "pixels", arr)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Image":
        """Build an Image from any integer array in [0, 255]."""
        a = np.asarray(arr)
        if a.dtype != np.uint8:
            if not np.issubdtype(a.dtype, np.integer):
                raise ValueError("pixel array must be integer-valued")
            if a.size and (a.min() < 0 or a.max() > 255):
                raise ValueError("pixel values must lie in [0, 255]")
            a = a.astype(np.uint8)
        return cls(a)

    @classmethod
    def constant(cls, width: int, height: int, rgb: tuple[int, int, int]) -> "Image":
        arr = np.empty((height, width, 3), dtype=np.uint8)
        arr[:, :] = rgb
        return cls(arr)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Image):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and np.array_equal(
            self.pixels, other.pixels
        )

    def __repr__(self) -> str:
        return f"Image({self.width}x{self.height})"


def _parse_header_ints(data: bytes, pos: int, count: int) -> tuple[list[int], int]:
    """Parse *count* ASCII integers starting at *pos*, skipping whitespace
    and '#' comments.  Returns (values, position after the last digit)."""
    values: list[int] = []
    n = len(data)
    while len(values) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos] == ord("#"):
            while pos < n and data[pos] not in (ord("\n"), ord("\r")):
                pos += 1
            continue
        start = pos
        while pos < n and ord("0") <= data[pos] <= ord("9"):
            pos += 1
        if pos == start:
            raise PpmError("malformed header: expected an integer field")
        values.append(int(data[start:pos]))
    return values, pos


def load_ppm(data: bytes) -> Image:
    """Parse a binary PPM (P6) file into an Image.

    Requires maxval 255.  Header fields may be separated by any ASCII
    whitespace and '#' comment lines; exactly one whitespace byte separates
    the maxval from the raster.
    """
    if not data.startswith(b"P6"):
        raise PpmError("not a P6 PPM file")
    (width, height, maxval), pos = _parse_header_ints(data, 2, 3)
    if width <= 0 or height <= 0:
        raise PpmError(f"dimensions must be positive, got {width}x{height}")
    if maxval != 255:
        raise PpmError(f"unsupported maxval {maxval}, only 255 is accepted")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PpmError("malformed header: missing whitespace before raster")
    pos += 1
    expected = width * height * 3
    raster = data[pos : pos + expected]
    if len(raster) < expected:
        raise PpmError(
            f"truncated raster: expected {expected} bytes, got {len(raster)}"
        )
    if len(data) > pos + expected:
        raise PpmError("trailing data after raster")
    arr = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return Image(arr.copy())


def save_ppm(img: Image) -> bytes:
    """Serialize an Image to canonical P6 bytes; exact inverse of load_ppm."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()
