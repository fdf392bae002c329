"""Tests for the tangent-process comparisons and moment ratios."""

import numpy as np
import pytest
from scipy import stats

from src.model import ModelSpec, ModelValidationError, SimulationConfig
from src.tangent import (
    ks_two_sample,
    moment_band,
    moment_ratio,
    rescale_increments,
    simulate_stable,
    stable_jump_counts,
    tangent_test,
)

STABLE = ModelSpec.builtin("1.2")
COARSE = SimulationConfig(dt=2.0 ** -8, z_min=1e-3)


class TestKolmogorovSmirnov:
    def test_identical_samples(self):
        a = np.linspace(0.0, 1.0, 50)
        result = ks_two_sample(a, a)
        assert result.statistic == 0.0
        assert result.p_value == pytest.approx(1.0)

    def test_disjoint_samples(self):
        result = ks_two_sample(np.zeros(100), np.ones(100))
        assert result.statistic == 1.0
        assert result.p_value < 1e-10

    def test_matches_library_asymptotics(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_cauchy(37), rng.standard_cauchy(53)
        expected = stats.ks_2samp(a, b, method="asymp")
        result = ks_two_sample(a, b)
        assert result.statistic == pytest.approx(expected.statistic)
        assert result.p_value == pytest.approx(expected.pvalue)

    def test_empty_sample(self):
        with pytest.raises(ValueError, match="non-empty"):
            ks_two_sample([], [1.0])


class TestStableComparator:
    def test_count_mean(self):
        counts = stable_jump_counts(1.0, 4000, seed=3, z_min=1e-3)
        assert np.mean(counts) == pytest.approx(1998.0, rel=0.01)

    def test_symmetric_and_deterministic(self):
        a = simulate_stable(1.2, 2000, seed=5, z_min=1e-2)
        b = simulate_stable(1.2, 2000, seed=5, z_min=1e-2)
        assert np.array_equal(a, b)
        assert abs(np.median(a)) < 0.15

    def test_symmetric_law(self):
        a = simulate_stable(1.2, 2000, seed=5, z_min=1e-2)
        assert ks_two_sample(a, -a).p_value >= 0.01

    def test_validation(self):
        with pytest.raises(ValueError, match="beta0"):
            simulate_stable(2.0, 10)
        with pytest.raises(ValueError, match="z_min < z_cap"):
            simulate_stable(1.2, 10, z_cap=1e-3, z_min=1e-2)


class TestRescaling:
    def test_rescaled_shape(self):
        ens = rescale_increments(STABLE, 0.0, 0.1, 50, seed=1, cfg=COARSE)
        assert ens.samples.shape == (50,)
        assert np.allclose(ens.beta0, 1.2)

    def test_later_start_on_grid(self):
        ens = rescale_increments(STABLE, 0.25, 0.1, 20, seed=1, cfg=COARSE)
        assert ens.t0 == 0.25
        assert np.all(np.isfinite(ens.samples))

    def test_start_off_grid(self):
        with pytest.raises(ValueError, match="multiple of dt"):
            rescale_increments(STABLE, 0.1, 0.1, 5, seed=1, cfg=COARSE)

    def test_requires_pure_jump(self):
        with pytest.raises(ModelValidationError, match="sigma"):
            rescale_increments(ModelSpec.builtin("1.2", sigma="1"), 0.0, 0.1, 5, seed=1, cfg=COARSE)
        with pytest.raises(ModelValidationError, match="b = 0"):
            rescale_increments(ModelSpec.builtin("1.2", b="0.5"), 0.0, 0.1, 5, seed=1, cfg=COARSE)
        with pytest.raises(ModelValidationError, match="builtin"):
            rescale_increments(ModelSpec.custom("z"), 0.0, 0.1, 5, seed=1, cfg=COARSE)


class TestTangentTest:
    def test_rows_per_alpha(self):
        rows = tangent_test(STABLE, 0.0, [0.01, 0.1], 200, seed=2, cfg=COARSE)
        assert [r.alpha for r in rows] == [0.1, 0.01]
        for r in rows:
            assert 0.0 <= r.ks <= 1.0
            assert 0.0 <= r.p <= 1.0
            assert r.beta0 == pytest.approx(1.2)

    def test_constant_index_is_stable(self):
        rows = tangent_test(STABLE, 0.0, [0.1], 1000, seed=4, cfg=COARSE)
        assert rows[0].ks < 0.1

    def test_needs_origin(self):
        with pytest.raises(ValueError, match="t0 = 0"):
            tangent_test(STABLE, 0.25, [0.1], 10, seed=1, cfg=COARSE)

    def test_needs_alphas(self):
        with pytest.raises(ValueError, match="empty"):
            tangent_test(STABLE, 0.0, [], 10, seed=1, cfg=COARSE)


class TestMoments:
    def test_band_large_index(self):
        assert moment_band(1.2, 0.1) == pytest.approx((1.3, 2.0))

    def test_band_small_index(self):
        assert moment_band(0.4, 0.1) == pytest.approx((0.5, 0.8))

    def test_empty_band(self):
        with pytest.raises(ValueError, match="empty moment band"):
            moment_band(0.95, 0.1)

    def test_gamma_outside_band(self):
        with pytest.raises(ValueError, match="outside the admissible band"):
            moment_ratio(STABLE, 0.1, 1.0, [0.1], 10, seed=1, cfg=COARSE)

    def test_jump_free_model_has_zero_ratio(self):
        model = ModelSpec.custom("0")
        rows = moment_ratio(model, 0.1, 1.5, [0.1, 0.01], 5, seed=1, cfg=COARSE)
        assert [r.ratio for r in rows] == [0.0, 0.0]
        assert [r.stopped_fraction for r in rows] == [0.0, 0.0]

    def test_ratios_are_finite(self):
        rows = moment_ratio(STABLE, 0.1, 1.5, [0.1, 0.05], 200, seed=3, cfg=COARSE)
        for r in rows:
            assert np.isfinite(r.ratio) and r.ratio > 0
            assert r.stopped_fraction == 0.0
