"""Bundled assets: the reference surrogate model and 256x256 test scenes.

Everything here is generated deterministically by ``scripts/build_assets.py``
and committed; the tests cross-check the committed bytes against fresh
regeneration.
"""

from __future__ import annotations

from importlib import resources

import numpy as np

from ..image import Image, load_ppm
from ..oracle import SurrogateModel, model_from_json
from ..rng import derive_seed, uniform_stream

# generation parameters for the committed assets (see scripts/build_assets.py)
BUNDLED_MODEL_SEED = 1020
BUNDLED_MODEL_N_PER_CLASS = 1
TEST_SCENE_SEEDS = {"scene_gradients": 501, "scene_patches": 502}
TEST_SCENE_SIZE = 256


def _read(name: str) -> bytes:
    return resources.files(__package__).joinpath(name).read_bytes()


def bundled_surrogate_model() -> SurrogateModel:
    """The committed reference surrogate (8 synthetic classes)."""
    return model_from_json(_read("surrogate_model.json").decode("utf-8"))


def bundled_test_images() -> list[tuple[str, Image]]:
    """The committed 256x256 test scenes used by the filter-efficacy suite."""
    return [
        (name, load_ppm(_read(f"{name}.ppm"))) for name in sorted(TEST_SCENE_SEEDS)
    ]


def _smooth_field(seed: int, size: int, num_waves: int, amp: float) -> np.ndarray:
    """Sum of seeded low-frequency sinusoids; mimics natural image structure."""
    u = uniform_stream(seed, num_waves * 4)
    yy, xx = np.mgrid[0:size, 0:size] / size
    f = np.zeros((size, size))
    for i in range(num_waves):
        fx = 1 + np.floor(u[4 * i] * 4)
        fy = 1 + np.floor(u[4 * i + 1] * 4)
        phx = u[4 * i + 2] * 2 * np.pi
        phy = u[4 * i + 3] * 2 * np.pi
        f += np.sin(2 * np.pi * fx * xx + phx) * np.sin(2 * np.pi * fy * yy + phy)
    return amp * f / num_waves ** 0.5


def make_test_scene(seed: int, size: int = TEST_SCENE_SIZE) -> Image:
    """Procedural photo-like scene: smooth color fields, a few flat patches,
    and fine-grain texture.  Values stay inside [10, 245] so the impulse
    detector never flags legitimate content."""
    base = np.zeros((size, size, 3))
    for c in range(3):
        base[:, :, c] = 128 + _smooth_field(derive_seed(seed, "wave", c), size, 6, 70)
    u = uniform_stream(derive_seed(seed, "shapes", 0), 40)
    yy, xx = np.mgrid[0:size, 0:size]
    for i in range(6):
        cy, cx = u[6 * i] * size, u[6 * i + 1] * size
        radius = (0.08 + 0.12 * u[6 * i + 2]) * size
        color = [40 + u[6 * i + 3 + c] * 175 for c in range(3)]
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius
        for c in range(3):
            base[mask, c] = 0.35 * base[mask, c] + 0.65 * color[c]
    grain = uniform_stream(derive_seed(seed, "texture", 0), size * size * 3)
    base += (grain.reshape(size, size, 3) - 0.5) * 12.0
    return Image(np.clip(np.round(base), 10, 245).astype(np.uint8))
