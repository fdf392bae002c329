"""Tests for spectrum shapes, case resolution and the estimators."""

import math

import numpy as np
import pytest

from src.points import sample_points
from src.spectrum import (
    NEG_INF,
    SYMBOLIC_C1,
    CaseKind,
    IntervalContext,
    PointContext,
    SpectrumCurve,
    SpectrumPoint,
    empirical_spectrum,
    f_cont,
    f_jump,
    levy_spectrum,
    lm_detect,
    local_spectrum,
    pointwise_spectrum,
    resolve_case,
    sup_consistency,
    theory_curve,
)


class TestShapes:
    def test_f_cont(self):
        assert f_cont(1.0, 1.2, 0.5) == pytest.approx(0.6)
        assert f_cont(0.0, 1.2, 1.0 / 1.2) == 0.0
        assert f_cont(1.0, 1.2, 0.9) == NEG_INF

    def test_f_jump(self):
        assert f_jump(1.0, 1.0, 1.5, 0.8, 0.5) == pytest.approx(0.75)
        assert f_jump(1.0, 1.0, 1.5, 0.8, 1.0 / 1.5) == 1.0
        assert f_jump(1.0, 1.0, 1.5, 0.8, 1.0) == pytest.approx(0.8)
        assert f_jump(1.0, 0.0, 1.5, 0.8, 1.25) == 0.0
        assert f_jump(1.0, 1.0, 1.5, 0.8, 2.0) == NEG_INF

    def test_f_jump_symbolic_breakpoint(self):
        assert f_jump(SYMBOLIC_C1, 1.0, 1.5, 0.8, 1.0 / 1.5) == pytest.approx(0.8 / 1.5)

    def test_levy(self):
        assert levy_spectrum(1.5, 0.2) == pytest.approx(0.3)
        assert levy_spectrum(1.5, 0.5) == 1.0
        assert levy_spectrum(1.5, 0.6) == NEG_INF

    def test_validation(self):
        with pytest.raises(ValueError, match="gamma"):
            f_cont(1.0, 2.0, 0.1)
        with pytest.raises(ValueError, match="non-negative"):
            f_cont(1.0, 1.0, -0.1)
        with pytest.raises(ValueError, match="gamma1 > gamma2"):
            f_jump(1.0, 1.0, 0.8, 1.5, 0.1)


def ctx(**kwargs):
    base = dict(sigma_zero=True, beta_t=1.2, beta_t_minus=1.2)
    base.update(kwargs)
    return PointContext(**base)


JUMP_UP = dict(is_jump_time=True, beta_t=1.5, beta_t_minus=0.8)
JUMP_DOWN = dict(is_jump_time=True, beta_t=0.8, beta_t_minus=1.5)


class TestResolveCase:
    @pytest.mark.parametrize(
        "context, kind, expected",
        [
            (ctx(sigma_zero=False), CaseKind.DIFFUSION, {"gamma": 1.2}),
            (ctx(sigma_zero=False, **JUMP_UP), CaseKind.DIFFUSION, {"gamma": 1.5}),
            (ctx(), CaseKind.CONT, {"c": 1.0}),
            (ctx(lm_plus=True), CaseKind.CONT, {"c": 1.0}),
            (ctx(lm_minus=True), CaseKind.CONT, {"c": 1.0}),
            (ctx(lm_plus=True, lm_minus=True), CaseKind.CONT, {"c": 0.0}),
            (ctx(lm_plus=True, lm_minus=True, delta_t=1.04), CaseKind.CONT, {"c": 0.0}),
            (ctx(lm_plus=True, lm_minus=True, delta_t=2.0), CaseKind.CONT, {"c": NEG_INF}),
            (ctx(is_jump_time=True), CaseKind.CONT, {"c": 1.0}),
            (ctx(**JUMP_UP), CaseKind.JUMP, {"c1": 1.0, "c2": 1.0}),
            (ctx(lm_minus=True, **JUMP_UP), CaseKind.JUMP, {"c1": 1.0, "c2": 0.0}),
            (ctx(lm_minus=True, delta_t=2.0, **JUMP_UP), CaseKind.JUMP, {"c1": 1.0, "c2": NEG_INF}),
            (ctx(lm_minus=True, **JUMP_DOWN), CaseKind.JUMP, {"c1": 1.0, "c2": NEG_INF}),
            (ctx(lm_plus=True, **JUMP_UP), CaseKind.JUMP, {"c1": SYMBOLIC_C1, "c2": 1.0}),
            (ctx(lm_plus=True, lm_minus=True, **JUMP_UP), CaseKind.JUMP, {"c1": SYMBOLIC_C1, "c2": 0.0}),
            (ctx(lm_plus=True, lm_minus=True, **JUMP_DOWN), CaseKind.JUMP, {"c1": SYMBOLIC_C1, "c2": NEG_INF}),
        ],
    )
    def test_table(self, context, kind, expected):
        case = resolve_case(context)
        assert case.kind is kind
        for name, value in expected.items():
            assert getattr(case, name) == value
        assert case.provenance

    def test_jump_orders_indices(self):
        case = resolve_case(ctx(**JUMP_DOWN))
        assert (case.gamma1, case.gamma2) == (1.5, 0.8)

    def test_inconsistent_context(self):
        with pytest.raises(ValueError, match="inconsistent"):
            resolve_case(ctx(beta_t_minus=1.0))

    def test_pointwise_value(self):
        assert pointwise_spectrum(ctx(), 0.5) == pytest.approx(0.6)

    def test_case_serializes(self):
        doc = resolve_case(ctx(lm_plus=True, lm_minus=True, delta_t=2.0)).to_dict()
        assert doc["kind"] == "cont"
        assert doc["c"] == "-inf"


class TestLocalSpectrum:
    CTX = IntervalContext(sigma_zero=True, betas=np.array([0.8, 1.2]))

    @pytest.mark.parametrize(
        "h, expected",
        [(0.0, 0.0), (0.5, 0.6), (1.0, 0.8), (1.0 / 1.2, 1.0)],
    )
    def test_values(self, h, expected):
        point = local_spectrum(self.CTX, h)
        assert point.flag == "ok"
        assert point.d == pytest.approx(expected)

    def test_beyond_smallest_index(self):
        point = local_spectrum(self.CTX, 1.3)
        assert point.d == NEG_INF
        assert point.flag == "empty"

    def test_undefined_at_jump_breakpoint(self):
        ctx_jump = IntervalContext(sigma_zero=True, betas=np.array([0.8, 1.2]), jump_betas=np.array([1.0]))
        point = local_spectrum(ctx_jump, 1.0)
        assert point.flag == "undefined"
        assert math.isnan(point.d)

    def test_with_brownian_part(self):
        ctx_noise = IntervalContext(sigma_zero=False, betas=np.array([0.8, 1.2]))
        assert local_spectrum(ctx_noise, 0.3).d == pytest.approx(0.36)
        assert local_spectrum(ctx_noise, 0.7).flag == "empty"

    def test_needs_samples(self):
        with pytest.raises(ValueError, match="at least one"):
            IntervalContext(sigma_zero=True, betas=np.empty(0))

    @staticmethod
    def rising(sigma_zero):
        return lambda t: PointContext(sigma_zero=sigma_zero, beta_t=1.0 + 0.5 * t, beta_t_minus=1.0 + 0.5 * t)

    @pytest.mark.parametrize("h, expected", [(0.3, 0.45), (0.5, 1.0)])
    def test_sup_consistency_with_brownian_part(self, h, expected):
        local, pointwise = sup_consistency((0.0, 1.0), h, 11, self.rising(False))
        assert local == pytest.approx(expected)
        assert pointwise == pytest.approx(expected)

    def test_sup_consistency_beyond_smallest_index(self):
        assert sup_consistency((0.0, 1.0), 1.2, 11, self.rising(True)) == (NEG_INF, NEG_INF)

    def test_sup_consistency_samples_the_interval(self):
        seen = []

        def ctx_at(t):
            seen.append(t)
            return ctx(beta_t=1.0, beta_t_minus=1.0)

        sup_consistency((0.25, 0.75), 0.5, 3, ctx_at)
        assert seen == [0.25, 0.5, 0.75]

    def test_sup_consistency_validation(self):
        with pytest.raises(ValueError, match="a <= b"):
            sup_consistency((0.5, 0.2), 0.5, 3, self.rising(True))
        with pytest.raises(ValueError, match="t_grid"):
            sup_consistency((0.0, 1.0), 0.5, 0, self.rising(True))


TIMES = np.arange(-100, 101) / 100.0


class TestLMDetect:
    def test_strict_minimum(self):
        betas = 1.0 + np.abs(TIMES)
        assert lm_detect(TIMES, betas, 0.0, "plus").is_lm
        assert lm_detect(TIMES, betas, 0.0, "minus").is_lm

    def test_monotone(self):
        betas = 1.0 + TIMES
        assert lm_detect(TIMES, betas, 0.0, "plus").is_lm
        assert not lm_detect(TIMES, betas, 0.0, "minus").is_lm

    def test_flat_is_not_strict(self):
        assert not lm_detect(TIMES, np.ones_like(TIMES), 0.0, "plus").is_lm

    def test_limit_override(self):
        betas = 1.0 + np.abs(TIMES)
        assert not lm_detect(TIMES, betas, 0.0, "plus", limit=2.0).is_lm

    def test_insufficient_samples(self):
        out = lm_detect(TIMES, np.ones_like(TIMES), 1.0, "plus")
        assert not out.is_lm
        assert out.flag == "insufficient"

    def test_validation(self):
        with pytest.raises(ValueError, match="side"):
            lm_detect(TIMES, TIMES, 0.0, "up")
        with pytest.raises(ValueError, match="window"):
            lm_detect(TIMES, TIMES, 0.0, "plus", window=1)


class TestCurves:
    def test_samples_must_increase(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            SpectrumCurve([SpectrumPoint(0.2, 0.1), SpectrumPoint(0.1, 0.1)], (0.0, 1.0))

    def test_theory_curve_point(self):
        curve = theory_curve(ctx(), np.linspace(0.0, 1.0, 5), (0.0, 1.0))
        assert curve.provenance == "cont: not LM"
        assert [p.flag for p in curve.samples][-1] == "empty"
        assert curve.samples[1].d == pytest.approx(0.3)

    def test_theory_curve_interval(self):
        curve = theory_curve(TestLocalSpectrum.CTX, [0.0, 0.5], (0.0, 1.0))
        assert curve.provenance == "local"
        assert curve.samples[1].d == pytest.approx(0.6)

    def test_curve_serializes_infinities(self):
        doc = theory_curve(ctx(), [0.5, 1.0], (0.0, 1.0)).to_dict()
        assert doc["samples"][1]["d"] == "-inf"


class TestEmpiricalSpectrum:
    def setup_method(self):
        self.ps = sample_points(1.0, 1e-4, 12)

    def test_unit_exponent_fills_interval(self):
        curve = empirical_spectrum(self.ps, np.array([0.0]), np.array([1.0]), (0.0, 1.0), [1.0], j_max=10)
        assert curve.mode == "empirical"
        assert curve.samples[0].d == pytest.approx(1.0)
        assert curve.notes == []

    def test_values_are_dimensions(self):
        curve = empirical_spectrum(self.ps, np.array([0.0]), np.array([1.0]), (0.0, 1.0), [0.5, 0.7, 1.0], j_max=10)
        for p in curve.samples:
            assert p.flag in ("ok", "empty", "degenerate")
            if p.flag == "ok":
                assert 0.0 <= p.d <= 1.0

    def test_validation(self):
        betas = (np.array([0.0]), np.array([1.0]))
        with pytest.raises(ValueError, match="interval"):
            empirical_spectrum(self.ps, *betas, (0.5, 0.2), [1.0], j_max=10)
        with pytest.raises(ValueError, match="j_max"):
            empirical_spectrum(self.ps, *betas, (0.0, 1.0), [1.0], j_max=5)
        with pytest.raises(ValueError, match="bin_width"):
            empirical_spectrum(self.ps, *betas, (0.0, 1.0), [1.0], j_max=10, bin_width=0.0)
        with pytest.raises(ValueError, match="aligned"):
            empirical_spectrum(self.ps, np.array([0.0, 0.5]), np.array([1.0]), (0.0, 1.0), [1.0], j_max=10)
