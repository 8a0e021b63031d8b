"""Countermeasure filters: weighted-average impulse restoration and
separable Gaussian low-pass smoothing."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .image import Image


@dataclass(frozen=True)
class FilterConfig:
    """Parameters of the weighted-average restoration and the low-pass blur."""

    initial_radius: int = 1
    max_radius: int = 3
    max_passes: int = 5
    lowpass_sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.initial_radius < 1 or self.max_radius < 1 or self.max_passes < 1:
            raise ValueError("radius and pass counts must be >= 1")
        if self.initial_radius > self.max_radius:
            raise ValueError("initial_radius must not exceed max_radius")
        if self.lowpass_sigma <= 0.0:
            raise ValueError("lowpass_sigma must be > 0")


def detect_impulse_mask(img: Image) -> np.ndarray:
    """Boolean (h, w, 3) mask of samples that are exactly 0 or 255.

    Under the salt-and-pepper model these extremes are the only corruption
    signature; legitimately saturated samples are accepted collateral.
    """
    pix = img.pixels
    return (pix == 0) | (pix == 255)


def weighted_average_filter(img: Image, cfg: FilterConfig = FilterConfig()) -> Image:
    """Restore flagged extreme samples from their valid neighborhoods.

    Each pass replaces every flagged sample with the 1/distance-weighted
    average of unflagged same-channel samples in a window that grows from
    ``initial_radius`` to ``max_radius`` until it contains a valid neighbor.
    Samples restored in one pass count as valid in the next.  Whatever is
    still unresolved after ``max_passes`` falls back to the channel's median
    over valid samples (128 if the whole channel is flagged).  Unflagged
    samples are never modified.
    """
    flags = detect_impulse_mask(img)
    vals = img.pixels.astype(np.float64)
    for _ in range(cfg.max_passes):
        if not flags.any():
            break
        vals, flags = _kernels.restore_pass(
            vals, flags, cfg.initial_radius, cfg.max_radius
        )
    if flags.any():
        for ch in range(3):
            ch_flags = flags[:, :, ch]
            if not ch_flags.any():
                continue
            valid = vals[:, :, ch][~ch_flags]
            fill = math.floor(float(np.median(valid)) + 0.5) if valid.size else 128
            plane = vals[:, :, ch]
            plane[ch_flags] = fill
    return Image(np.clip(vals, 0.0, 255.0).astype(np.uint8))


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(3.0 * sigma)
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(t * t) / (2.0 * sigma * sigma))
    return k / k.sum()


def _conv_axis(arr: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    h, w, c = arr.shape
    if axis == 1:  # along x: one line per (y, channel)
        lines = np.ascontiguousarray(arr.transpose(0, 2, 1)).reshape(h * c, w)
        out = _kernels.conv_lines(lines, kernel)
        return out.reshape(h, c, w).transpose(0, 2, 1)
    lines = np.ascontiguousarray(arr.transpose(1, 2, 0)).reshape(w * c, h)
    out = _kernels.conv_lines(lines, kernel)
    return out.reshape(w, c, h).transpose(2, 0, 1)


def gaussian_lowpass(img: Image, sigma: float) -> Image:
    """Separable Gaussian blur with kernel radius ceil(3*sigma).

    Border samples are replicated; the result is rounded to the nearest
    integer (halves away from zero, all values non-negative) and clipped.
    """
    if sigma <= 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    kernel = _gaussian_kernel(sigma)
    acc = img.pixels.astype(np.float64)
    acc = _conv_axis(acc, kernel, axis=1)
    acc = _conv_axis(acc, kernel, axis=0)
    out = np.floor(acc + 0.5)
    return Image(np.clip(out, 0.0, 255.0).astype(np.uint8))
