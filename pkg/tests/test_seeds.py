"""Tests for seed derivation and generator streams."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from src.seeds import MASK64, derive_seed, label_hash, stream_rng


class TestDeriveSeed:
    def test_deterministic(self):
        assert derive_seed(42, "paths", 3) == derive_seed(42, "paths", 3)

    def test_fits_in_64_bits(self):
        for master in (0, 1, MASK64):
            assert 0 <= derive_seed(master, "points", 7) <= MASK64

    def test_negative_index_rejected(self):
        with pytest.raises(ValueError, match="non-negative"):
            derive_seed(1, "paths", -1)

    def test_label_hash_is_stable(self):
        # blake2b, not the per-process str hash
        assert label_hash("points") == label_hash("points")
        assert label_hash("points") != label_hash("paths")

    def test_collision_scan(self):
        rng = np.random.default_rng(0)
        masters = [int(m) for m in rng.integers(0, 2 ** 63, size=20_000)]
        seeds = set()
        for m in masters:
            seeds.add(derive_seed(m, "paths", 0))
            seeds.add(derive_seed(m, "paths", 1))
            seeds.add(derive_seed(m, "points", 0))
            seeds.add(derive_seed(m, "points", 1))
        assert len(seeds) == 4 * len(set(masters))

    @given(st.integers(min_value=0, max_value=MASK64), st.integers(min_value=0, max_value=10 ** 6))
    def test_index_is_injective_locally(self, master, index):
        assert derive_seed(master, "paths", index) != derive_seed(master, "paths", index + 1)


class TestStreamRng:
    def test_same_seed_same_draws(self):
        a = stream_rng(11, "gaps").random(8)
        b = stream_rng(11, "gaps").random(8)
        assert np.array_equal(a, b)

    def test_purposes_are_independent_streams(self):
        a = stream_rng(11, "gaps").random(8)
        b = stream_rng(11, "times").random(8)
        assert not np.array_equal(a, b)

    def test_prefix_property(self):
        long = stream_rng(5, "brownian").standard_normal(1000)
        short = stream_rng(5, "brownian").standard_normal(10)
        assert np.array_equal(long[:10], short)

    def test_philox_bit_generator(self):
        assert isinstance(stream_rng(0, "gaps").bit_generator, np.random.Philox)
