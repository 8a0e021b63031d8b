import numpy as np
import pytest

from noiseprobe.image import Image

TESTS_DATA = __import__("pathlib").Path(__file__).parent / "data"


def rand_image(rng: np.random.Generator, width: int, height: int) -> Image:
    return Image(rng.integers(0, 256, size=(height, width, 3), dtype=np.uint8))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
