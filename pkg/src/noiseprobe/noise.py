"""Seeded impulse (salt-and-pepper) and Gaussian noise injection.

Both injectors are pure functions of (image, parameter, seed): each call
consumes a private counter-mode stream from :mod:`noiseprobe.rng`, so
identical inputs give byte-identical outputs and concurrent calls never
interact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import Image
from .rng import uniform_stream

IMPULSE = "impulse"
GAUSSIAN = "gaussian"

# Escalation "density" d maps to sigma = d * GAUSSIAN_SIGMA_MAX for the
# gaussian kind, giving both noise kinds a common [0, 1] severity dial.
GAUSSIAN_SIGMA_MAX = 100.0


@dataclass(frozen=True)
class NoiseSpec:
    """Noise kind plus its single parameter and a 64-bit seed."""

    kind: str
    density: float | None = None
    sigma: float | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind == IMPULSE:
            if self.sigma is not None:
                raise ValueError("impulse noise takes a density, not sigma")
            if self.density is None or not 0.0 <= self.density <= 1.0:
                raise ValueError("impulse density must lie in [0, 1]")
        elif self.kind == GAUSSIAN:
            if self.density is not None:
                raise ValueError("gaussian noise takes sigma, not a density")
            if self.sigma is None or self.sigma < 0.0:
                raise ValueError("gaussian sigma must be >= 0")
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def impulse(cls, density: float, seed: int = 0) -> "NoiseSpec":
        return cls(kind=IMPULSE, density=density, seed=seed)

    @classmethod
    def gaussian(cls, sigma: float, seed: int = 0) -> "NoiseSpec":
        return cls(kind=GAUSSIAN, sigma=sigma, seed=seed)

    def apply(self, img: Image, seed: int | None = None) -> Image:
        s = self.seed if seed is None else seed
        if self.kind == IMPULSE:
            return add_impulse(img, self.density, s)
        return add_gaussian(img, self.sigma, s)


def add_impulse(img: Image, density: float, seed: int) -> Image:
    """Salt-and-pepper corruption at the given density.

    Each channel sample independently draws one uniform u: u < p/2 sets the
    sample to 0, u >= 1 - p/2 sets it to 255, anything else leaves it
    untouched.  Draws are consumed row-major then channel.
    """
    if not 0.0 <= density <= 1.0:
        raise ValueError(f"density must lie in [0, 1], got {density}")
    pix = img.pixels
    u = uniform_stream(seed, pix.size).reshape(pix.shape)
    half = density / 2.0
    out = pix.copy()
    out[u < half] = 0
    out[u >= 1.0 - half] = 255
    return Image(out)


def add_gaussian(img: Image, sigma: float, seed: int) -> Image:
    """Additive zero-mean Gaussian noise, rounded and clipped to [0, 255].

    Deviates come from the Box-Muller transform; every sample consumes two
    consecutive uniforms from the stream (row-major then channel).  Rounding
    is to the nearest integer, halves away from zero.
    """
    if sigma < 0.0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    pix = img.pixels
    u = uniform_stream(seed, 2 * pix.size)
    u1 = np.maximum(u[0::2], 2.0 ** -53)  # keep log finite
    u2 = u[1::2]
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
    x = pix.astype(np.float64) + sigma * z.reshape(pix.shape)
    x = np.where(x >= 0.0, np.floor(x + 0.5), np.ceil(x - 0.5))
    return Image(np.clip(x, 0.0, 255.0).astype(np.uint8))
