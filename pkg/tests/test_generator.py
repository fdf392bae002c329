"""Tests for generator evaluation and the Monte Carlo cross-checks."""

import pytest

from src.generator import (
    compensator_drift,
    compute_btilde,
    generator_apply,
    generator_consistency,
    martingale_check,
    stable_like_generator_apply,
)
from src.model import ModelSpec, SimulationConfig
from src.quadrature import DivergentIntegralError

CAUCHY_WITH_NOISE = ModelSpec.builtin("1", sigma="1")
COARSE = SimulationConfig(dt=2.0 ** -8, z_min=1e-2)


class TestGeneratorApply:
    def test_square_with_noise(self):
        assert generator_apply(CAUCHY_WITH_NOISE, "x*x", 0.0) == pytest.approx(3.0, rel=1e-4)

    def test_stable_like_kernel_agrees(self):
        value = stable_like_generator_apply(CAUCHY_WITH_NOISE, "x*x", 0.0)
        assert value == pytest.approx(3.0, rel=1e-4)

    def test_pure_jump_small_index(self):
        model = ModelSpec.builtin("0.5")
        assert generator_apply(model, "x*x", 0.0) == pytest.approx(2.0 / 3.0, rel=1e-4)

    def test_drift_only(self):
        model = ModelSpec.custom("0", b="0.7")
        assert generator_apply(model, "x", 0.3) == pytest.approx(0.7, rel=1e-6)

    def test_constant_function(self):
        assert generator_apply(CAUCHY_WITH_NOISE, "1.5", 0.2) == pytest.approx(0.0, abs=1e-8)


class TestBtilde:
    def test_half(self):
        assert compute_btilde(ModelSpec.builtin("0.5"), 0.0) == pytest.approx(1.0, rel=1e-8)

    def test_two_thirds(self):
        assert compute_btilde(ModelSpec.builtin("2/3"), 0.0) == pytest.approx(2.0, rel=1e-6)

    def test_diverges_above_one(self):
        with pytest.raises(DivergentIntegralError, match="diverges"):
            compute_btilde(ModelSpec.builtin("1.2"), 0.0)

    def test_divergence_is_arithmetic_error(self):
        with pytest.raises(ArithmeticError):
            compute_btilde(ModelSpec.builtin("1"), 0.0)


class TestCompensatorDrift:
    def test_odd_coefficient(self):
        assert compensator_drift(ModelSpec.builtin("1.2"), 0.0, 1e-3) == pytest.approx(0.0, abs=1e-12)

    def test_one_sided_coefficient(self):
        model = ModelSpec.custom("max(z, 0)*max(z, 0)")
        assert compensator_drift(model, 0.0, 0.5) == pytest.approx(0.5, rel=1e-10)

    def test_truncation_range(self):
        with pytest.raises(ValueError, match="z_min"):
            compensator_drift(ModelSpec.builtin("1.2"), 0.0, 1.0)


class TestMonteCarlo:
    def test_martingale_moments(self):
        check = martingale_check(ModelSpec.builtin("1"), 1.0, 2000, seed=13, cfg=COARSE)
        assert check.predicted_var == pytest.approx(1.98, rel=1e-9)
        assert check.var_z == pytest.approx(1.98, rel=0.15)
        assert abs(check.mean_z) < 5.0 * check.stderr
        assert set(check.to_dict()) >= {"mean_z", "var_z", "predicted_var", "mean_ok"}

    def test_generator_consistency(self):
        rows = generator_consistency(CAUCHY_WITH_NOISE, "x*x", [0.1], 4000, seed=21, cfg=COARSE)
        assert len(rows) == 1
        assert rows[0].mc_rate == pytest.approx(rows[0].generator_value, rel=0.25)

    def test_deterministic_drift_rate(self):
        model = ModelSpec.custom("0", b="0.7")
        rows = generator_consistency(model, "x", [0.25, 0.5], 3, seed=1, cfg=COARSE)
        for row in rows:
            assert row.mc_rate == pytest.approx(0.7, rel=1e-9)
            assert row.generator_value == pytest.approx(0.7, rel=1e-6)

    def test_times_must_be_positive(self):
        with pytest.raises(ValueError, match="positive"):
            generator_consistency(CAUCHY_WITH_NOISE, "x", [0.0], 10, seed=1, cfg=COARSE)
