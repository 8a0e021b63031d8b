import hashlib
import json
import math

import numpy as np
import pytest

from noiseprobe.image import Image
from noiseprobe.metrics import psnr
from noiseprobe.noise import NoiseSpec, add_gaussian, add_impulse
from noiseprobe.rng import uniform_stream

from conftest import TESTS_DATA, rand_image

UNIFORM_128 = Image.constant(64, 64, (128, 128, 128))


def test_golden_noisy_outputs():
    """Committed hashes pin the PRNG discipline: any change to stream
    consumption or rounding shows up here."""
    golden = json.loads((TESTS_DATA / "golden_noise_hashes.json").read_text())
    imp = add_impulse(UNIFORM_128, golden["impulse"]["density"], golden["impulse"]["seed"])
    assert hashlib.sha256(imp.pixels.tobytes()).hexdigest() == golden["impulse"]["sha256"]
    gau = add_gaussian(UNIFORM_128, golden["gaussian"]["sigma"], golden["gaussian"]["seed"])
    assert hashlib.sha256(gau.pixels.tobytes()).hexdigest() == golden["gaussian"]["sha256"]


class TestImpulse:
    def test_zero_density_is_identity(self, rng):
        img = rand_image(rng, 30, 20)
        assert add_impulse(img, 0.0, 42) == img

    def test_full_density_all_extremes(self):
        out = add_impulse(UNIFORM_128, 1.0, 7)
        assert set(np.unique(out.pixels)) <= {0, 255}

    def test_only_extremes_or_original(self, rng):
        img = rand_image(rng, 40, 40)
        out = add_impulse(img, 0.3, 99)
        changed = out.pixels != img.pixels
        assert set(np.unique(out.pixels[changed])) <= {0, 255}

    def test_statistics_at_p02(self):
        img = Image.constant(512, 512, (128, 128, 128))
        out = add_impulse(img, 0.2, 2024)
        n = out.pixels.size
        extremes = int(((out.pixels == 0) | (out.pixels == 255)).sum())
        assert 0.19 <= extremes / n <= 0.21
        salt = int((out.pixels == 255).sum())
        pepper = int((out.pixels == 0).sum())
        assert 0.95 <= salt / pepper <= 1.05

    def test_determinism(self, rng):
        img = rand_image(rng, 33, 17)
        a = add_impulse(img, 0.25, 5)
        b = add_impulse(img, 0.25, 5)
        assert a == b
        assert a != add_impulse(img, 0.25, 6)

    def test_bad_density(self):
        with pytest.raises(ValueError):
            add_impulse(UNIFORM_128, -0.01, 0)
        with pytest.raises(ValueError):
            add_impulse(UNIFORM_128, 1.5, 0)

    def test_matches_scalar_reference(self):
        # independent re-derivation: walk the documented stream sample by
        # sample with the three-way single-draw partition
        img = Image.from_array(
            np.arange(2 * 3 * 3, dtype=np.int64).reshape(2, 3, 3) * 13 % 256
        )
        p, seed = 0.5, 314
        u = uniform_stream(seed, img.pixels.size)
        expected = []
        for i, v in enumerate(img.pixels.ravel()):
            if u[i] < p / 2:
                expected.append(0)
            elif u[i] >= 1 - p / 2:
                expected.append(255)
            else:
                expected.append(int(v))
        out = add_impulse(img, p, seed)
        assert out.pixels.ravel().tolist() == expected

    def test_monotone_distortion_in_expectation(self, rng):
        img = rand_image(rng, 48, 48)
        densities = [0.1, 0.2, 0.4]
        means = []
        for p in densities:
            vals = [psnr(add_impulse(img, p, s), img) for s in range(20)]
            means.append(sum(vals) / len(vals))
        assert means[0] > means[1] - 0.5 and means[1] > means[2] - 0.5
        assert means[0] > means[2]  # large gap must be strict


class TestGaussian:
    def test_zero_sigma_is_identity(self, rng):
        img = rand_image(rng, 30, 20)
        assert add_gaussian(img, 0.0, 42) == img

    def test_clipping_at_255(self):
        img = Image.constant(256, 256, (255, 255, 255))
        out = add_gaussian(img, 30.0, 11)
        assert out.pixels.max() <= 255
        assert out.pixels.mean() < 255.0  # clipping asymmetry pulls mean down

    def test_statistics_sigma20(self):
        img = Image.constant(512, 512, (128, 128, 128))
        out = add_gaussian(img, 20.0, 777)
        vals = out.pixels.astype(np.float64)
        assert abs(vals.mean() - 128.0) < 0.5
        assert abs(vals.std() - 20.0) < 0.5

    def test_determinism(self, rng):
        img = rand_image(rng, 21, 13)
        assert add_gaussian(img, 15.0, 3) == add_gaussian(img, 15.0, 3)
        assert add_gaussian(img, 15.0, 3) != add_gaussian(img, 15.0, 4)

    def test_bad_sigma(self):
        with pytest.raises(ValueError):
            add_gaussian(UNIFORM_128, -1.0, 0)

    def test_matches_scalar_reference(self):
        # Box-Muller from two consecutive draws per sample, rounded half
        # away from zero, clipped
        img = Image.constant(3, 2, (100, 100, 100))
        sigma, seed = 25.0, 2718
        u = uniform_stream(seed, 2 * img.pixels.size)
        expected = []
        for i, v in enumerate(img.pixels.ravel()):
            u1 = max(u[2 * i], 2.0 ** -53)
            u2 = u[2 * i + 1]
            z = math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)
            x = float(v) + sigma * z
            x = math.floor(x + 0.5) if x >= 0 else math.ceil(x - 0.5)
            expected.append(min(max(x, 0), 255))
        out = add_gaussian(img, sigma, seed)
        assert out.pixels.ravel().tolist() == expected


class TestNoiseSpec:
    def test_impulse_spec_applies(self):
        spec = NoiseSpec.impulse(0.2, seed=5)
        assert spec.apply(UNIFORM_128) == add_impulse(UNIFORM_128, 0.2, 5)

    def test_gaussian_spec_applies(self):
        spec = NoiseSpec.gaussian(10.0, seed=5)
        assert spec.apply(UNIFORM_128) == add_gaussian(UNIFORM_128, 10.0, 5)

    def test_seed_override(self):
        spec = NoiseSpec.impulse(0.2, seed=5)
        assert spec.apply(UNIFORM_128, seed=9) == add_impulse(UNIFORM_128, 0.2, 9)

    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseSpec.impulse(1.2)
        with pytest.raises(ValueError):
            NoiseSpec.gaussian(-0.5)
        with pytest.raises(ValueError):
            NoiseSpec(kind="impulse", density=0.1, sigma=1.0)
        with pytest.raises(ValueError):
            NoiseSpec(kind="speckle", density=0.1)
