"""Tests for model coefficients and simulation settings."""

import math

import numpy as np
import pytest

from src.model import JumpKind, ModelSpec, ModelValidationError, SimulationConfig


class TestModelSpec:
    def test_builtin_constant_index(self):
        model = ModelSpec.builtin("1.2")
        assert model.jump.kind is JumpKind.BUILTIN
        assert model.beta(0.3) == pytest.approx(1.2)

    def test_builtin_jump_size(self):
        model = ModelSpec.builtin("0.5")
        assert model.jump_size(0.0, 0.5) == pytest.approx(0.25)
        assert model.jump_size(0.0, -0.5) == pytest.approx(-0.25)

    def test_variable_index_vectorized(self):
        model = ModelSpec.builtin("clamp(1 + 0.5*sin(x), 0.6, 1.8)")
        out = model.beta(np.array([0.0, 10.0]))
        assert out.shape == (2,)
        assert out[0] == pytest.approx(1.0)

    def test_structure_flags(self):
        model = ModelSpec.builtin("1.2")
        assert model.sigma_zero and model.drift_zero and not model.jump_zero
        assert not ModelSpec.builtin("1.2", sigma="1").sigma_zero
        assert ModelSpec.builtin("1.2", sigma="0").sigma_zero
        assert not ModelSpec.builtin("1.2", b="0.7").drift_zero

    def test_jump_free_model(self):
        model = ModelSpec.custom("0", sigma="1")
        assert model.jump_zero
        assert math.isnan(model.beta(0.0))
        assert np.all(np.isnan(model.beta(np.zeros(3))))

    def test_custom_index_read_off(self):
        model = ModelSpec.custom("sign(z)*z*z")
        assert model.beta(0.0) == pytest.approx(0.5)

    def test_custom_declared_index_wins(self):
        model = ModelSpec.custom("sign(z)*z*z", beta_tilde="0.7")
        assert model.beta(1.0) == pytest.approx(0.7)

    def test_sigma_zero_evaluates_to_zeros(self):
        model = ModelSpec.builtin("1.2")
        assert model.sigma_at(0.5) == 0.0
        assert np.array_equal(model.sigma_at(np.ones(3)), np.zeros(3))

    def test_describe(self):
        doc = ModelSpec.builtin("1.2", b="0.7", x0=0.5).describe()
        assert doc["sigma"] == "ZERO"
        assert doc["jump"] == "builtin"
        assert doc["g"] is None
        assert doc["x0"] == 0.5

    def test_with_returns_copy(self):
        model = ModelSpec.builtin("1.2")
        moved = model.with_(x0=2.0)
        assert moved.x0 == 2.0 and model.x0 == 0.0


class TestModelValidation:
    def test_band_order(self):
        with pytest.raises(ModelValidationError, match="beta_band"):
            ModelSpec.builtin("1.2", beta_band=(1.5, 1.0))

    def test_band_upper_bound(self):
        with pytest.raises(ModelValidationError, match="beta_band"):
            ModelSpec.builtin("1.2", beta_band=(0.5, 2.0))

    def test_unknown_hypothesis(self):
        with pytest.raises(ModelValidationError, match="hypothesis"):
            ModelSpec.builtin("1.2", hypothesis="case_c")

    def test_case_a_needs_large_indices(self):
        with pytest.raises(ModelValidationError, match="case_a"):
            ModelSpec.builtin("1.2", hypothesis="case_a", beta_band=(0.5, 1.5))

    def test_case_b_needs_small_indices(self):
        with pytest.raises(ModelValidationError, match="case_b"):
            ModelSpec.builtin("0.5", hypothesis="case_b", beta_band=(0.2, 1.2))

    def test_non_finite_start(self):
        with pytest.raises(ModelValidationError, match="x0"):
            ModelSpec.builtin("1.2", x0=float("inf"))

    def test_is_value_error(self):
        with pytest.raises(ValueError):
            ModelSpec.builtin("1.2", hypothesis="?")


class TestSimulationConfig:
    def test_defaults(self):
        cfg = SimulationConfig()
        assert cfg.dt == 2.0 ** -12
        assert cfg.n_steps == 4096

    def test_uniform_nodes_end_on_horizon(self):
        cfg = SimulationConfig(dt=0.3, horizon=1.0)
        nodes = cfg.uniform_nodes()
        assert cfg.n_steps == 4
        assert nodes[-1] == 1.0
        assert np.all(np.diff(nodes) > 0)

    def test_validation(self):
        with pytest.raises(ValueError, match="dt"):
            SimulationConfig(dt=0.0)
        with pytest.raises(ValueError, match="z_min"):
            SimulationConfig(z_min=1.0)
        with pytest.raises(ValueError, match="horizon"):
            SimulationConfig(horizon=-1.0)
        with pytest.raises(ValueError, match="quad_n"):
            SimulationConfig(quad_n=1)
