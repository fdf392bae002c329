"""Tests for the admissibility checks on jump coefficients."""

import pytest

from src.admissibility import (
    AdmissibilityPlan,
    check_admissible,
    growth_integral,
)
from src.model import ModelSpec

VARIABLE_INDEX = ModelSpec.builtin("clamp(1 + 0.5*sin(x), 0.6, 1.8)")
ONE_SIDED = ModelSpec.custom("max(z, 0)*max(z, 0)")


class TestCheckAdmissible:
    def test_variable_index_passes(self):
        report = check_admissible(VARIABLE_INDEX)
        assert report.passed, report.failures
        assert report.condition("stable_slope").value == pytest.approx(1.0, abs=1e-9)

    def test_one_sided_fails_symmetry(self):
        report = check_admissible(ONE_SIDED)
        assert not report.passed
        assert "odd_symmetry" in report.failures
        assert not report.condition("odd_symmetry").passed

    def test_growth_constant(self):
        report = check_admissible(ModelSpec.builtin("0.5"))
        assert report.k0 == pytest.approx(2.0 / 3.0, rel=1e-6)
        assert report.k1 == pytest.approx(0.0, abs=1e-12)

    def test_growth_integral(self):
        assert growth_integral(ModelSpec.builtin("1"), 0.0) == pytest.approx(2.0, rel=1e-8)

    def test_band_violation(self):
        model = ModelSpec.builtin("1.5", beta_band=(0.5, 1.2))
        report = check_admissible(model)
        assert "band_envelope" in report.failures
        assert "leaves beta_band" in report.condition("band_envelope").detail

    def test_case_a_rejects_non_smooth_drift(self):
        model = ModelSpec.builtin("1.2", b="abs(x)", hypothesis="case_a", beta_band=(1.0, 1.99))
        report = check_admissible(model)
        assert not report.hypothesis_ok
        assert "hypothesis case_a" in report.failures
        assert any("non-smooth" in note for note in report.notes)

    def test_case_b_with_small_index(self):
        model = ModelSpec.builtin("0.5", hypothesis="case_b", beta_band=(0.1, 0.9))
        assert check_admissible(model).passed

    def test_jump_free_model(self):
        report = check_admissible(ModelSpec.custom("0", sigma="1"))
        assert report.passed
        assert report.k0 == 0.0

    def test_lipschitz_estimates(self):
        model = ModelSpec.builtin("1.2", sigma="0.3*x", b="0.7")
        report = check_admissible(model)
        assert report.sigma_lipschitz == pytest.approx(0.3, abs=1e-9)
        assert report.drift_lipschitz == 0.0

    def test_report_serializes(self):
        doc = check_admissible(ONE_SIDED).to_dict()
        assert doc["passed"] is False
        assert {c["name"] for c in doc["conditions"]} == {
            "odd_symmetry", "stable_slope", "log_lipschitz", "band_envelope",
        }


class TestPlan:
    def test_validation(self):
        with pytest.raises(ValueError, match="two x samples"):
            AdmissibilityPlan(xs=(0.0,))
        with pytest.raises(ValueError, match=r"\(0, 1\)"):
            AdmissibilityPlan(zs=(1e-3, 2.0))
        with pytest.raises(ValueError, match="positive"):
            AdmissibilityPlan(slope_tol=0.0)
