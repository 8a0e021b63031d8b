import numpy as np

from noiseprobe.rng import derive_seed, fnv1a64, mix64, uniform_stream


def test_mix64_reference_values():
    # SplitMix64 finalizer is a fixed function; pin a few outputs computed
    # directly from its definition with python ints
    def ref(x):
        m = (1 << 64) - 1
        x &= m
        x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & m
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & m
        return (x ^ (x >> 31)) & m

    for v in (0, 1, 42, 2**63, 2**64 - 1, 0xDEADBEEF):
        assert mix64(v) == ref(v)


def test_mix64_avalanche():
    a, b = mix64(1), mix64(2)
    assert bin(a ^ b).count("1") > 16


def test_fnv1a64_known_vector():
    # standard FNV-1a test vector: empty string hashes to the offset basis
    assert fnv1a64(b"") == 0xCBF29CE484222325
    assert fnv1a64(b"a") == 0xAF63DC4C8601EC8C


def test_uniform_stream_range_and_determinism():
    u = uniform_stream(987654321, 100000)
    assert u.shape == (100000,)
    assert (u >= 0.0).all() and (u < 1.0).all()
    assert np.array_equal(u, uniform_stream(987654321, 100000))
    # streams from different seeds differ
    assert not np.array_equal(u, uniform_stream(987654322, 100000))


def test_uniform_stream_prefix_consistency():
    # counter mode: a longer stream extends a shorter one
    u5 = uniform_stream(7, 5)
    u10 = uniform_stream(7, 10)
    assert np.array_equal(u5, u10[:5])


def test_uniform_stream_mean():
    u = uniform_stream(1, 200000)
    assert abs(u.mean() - 0.5) < 0.005


def test_derive_seed_sensitivity():
    base = derive_seed(1, "img", 0)
    assert derive_seed(1, "img", 0) == base
    assert derive_seed(2, "img", 0) != base
    assert derive_seed(1, "img2", 0) != base
    assert derive_seed(1, "img", 1) != base
    assert derive_seed(1, "img", 0, 0) != base


def test_derive_seed_is_64_bit():
    s = derive_seed(2**64 - 1, "x", 2**63)
    assert 0 <= s < 2**64
