"""
Numerical membership checks for the class of admissible jump coefficients.

A coefficient G is admissible when, on the sampled grid:

1. odd_symmetry   G(x,−z) = −G(x,z) and G(x,z) has the sign of z;
2. stable_slope   log|G(x,z)| / log|z| settles at 1/β̃(x) as |z| → 0;
3. log_lipschitz  |log|G(y,z)| − log|G(x,z)|| ≤ C|x−y|·|log|z||;
4. band_envelope  β̃ stays in beta_band and |G(x,z)| ≤ |z|^{1/(β̃(x)+ε)}
                  for |z| below r_ε.

The report also carries the growth constant K₀ (∫G² dz/z² ≤ K₀(1+x²)),
the Lipschitz constant K₁ (∫(G(x,·)−G(y,·))² dz/z² ≤ K₁|x−y|²), Lipschitz
estimates for σ and b, and whether the declared hypothesis regime holds.
Checks never raise for a failing coefficient; the report lists what failed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.coeffexpr import BinOp, Call, Expr, Neg, estimate_lipschitz
from src.generator import compute_btilde
from src.model import ModelSpec
from src.quadrature import DivergentIntegralError, quad_checked

logger = logging.getLogger(__name__)

_NON_SMOOTH = {"abs", "sign", "clamp", "min", "max"}


@dataclass(frozen=True)
class AdmissibilityPlan:
    """Sampling grid and tolerances for check_admissible."""
    xs: Tuple[float, ...] = tuple(float(v) for v in np.linspace(-2.0, 2.0, 21))
    zs: Tuple[float, ...] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8)
    slope_tol: float = 0.05
    eps: float = 0.05
    r_eps: float = 1e-4

    def __post_init__(self):
        if len(self.xs) < 2:
            raise ValueError("need at least two x samples")
        if any(not 0.0 < z < 1.0 for z in self.zs):
            raise ValueError("z samples must lie in (0, 1)")
        if not self.slope_tol > 0 or not self.eps > 0:
            raise ValueError("tolerances must be positive")


@dataclass
class ConditionResult:
    name: str
    passed: bool
    detail: str = ""
    value: Optional[float] = None

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail, "value": _finite_or_none(self.value)}


@dataclass
class AdmissibilityReport:
    conditions: List[ConditionResult]
    k0: float = float("nan")
    k1: float = float("nan")
    sigma_lipschitz: float = 0.0
    drift_lipschitz: float = 0.0
    hypothesis: str = "none"
    hypothesis_ok: bool = True
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions) and self.hypothesis_ok

    @property
    def failures(self) -> List[str]:
        names = [c.name for c in self.conditions if not c.passed]
        if not self.hypothesis_ok:
            names.append(f"hypothesis {self.hypothesis}")
        return names

    def condition(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "conditions": [c.to_dict() for c in self.conditions],
            "k0": _finite_or_none(self.k0),
            "k1": _finite_or_none(self.k1),
            "sigma_lipschitz": _finite_or_none(self.sigma_lipschitz),
            "drift_lipschitz": _finite_or_none(self.drift_lipschitz),
            "hypothesis": self.hypothesis,
            "hypothesis_ok": self.hypothesis_ok,
            "notes": self.notes,
        }


def _finite_or_none(v: Optional[float]):
    if v is None or not math.isfinite(v):
        return None
    return round(float(v), 12)


# ─── Individual conditions ────────────────────────────────────────────────────


def _odd_symmetry(g_pos: np.ndarray, g_neg: np.ndarray, zs: np.ndarray) -> ConditionResult:
    odd = np.isclose(g_neg, -g_pos, rtol=1e-12, atol=0.0)
    signed = (g_pos >= 0.0) & (g_neg <= 0.0)
    bad = ~(odd & signed)
    if bad.any():
        i, k = np.argwhere(bad)[0]
        return ConditionResult("odd_symmetry", False, f"fails at sample x#{i}, z={zs[k]:g}")
    return ConditionResult("odd_symmetry", True)


def _log_sizes(g_pos: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(g_pos))


def _stable_slope(model: ModelSpec, xs, zs, log_g, plan: AdmissibilityPlan) -> ConditionResult:
    with np.errstate(invalid="ignore"):
        slopes = log_g / np.log(zs)[None, :]
    if not np.all(np.isfinite(slopes[:, -2:])):
        return ConditionResult("stable_slope", False, "G vanishes at small |z|")

    at_zero = float(model.jump_size(0.0, zs[-1]))
    zero_slope = math.log(abs(at_zero)) / math.log(zs[-1]) if at_zero != 0.0 else float("nan")

    if model.jump.beta_tilde is not None:
        target = 1.0 / np.asarray(model.beta(np.asarray(xs)), dtype=float)
        gap = np.abs(slopes[:, -1] - target)
        detail = f"max |slope - 1/beta_tilde| = {gap.max():.3g}"
    else:
        gap = np.abs(slopes[:, -1] - slopes[:, -2])
        detail = f"slope drift between the two smallest |z| = {gap.max():.3g}"
    return ConditionResult("stable_slope", bool(gap.max() <= plan.slope_tol), detail, zero_slope)


def _log_lipschitz(xs, zs, log_g) -> ConditionResult:
    if not np.all(np.isfinite(log_g)):
        return ConditionResult("log_lipschitz", False, "G vanishes on the grid", float("inf"))
    dx = np.diff(np.asarray(xs))[:, None]
    ratio = np.abs(np.diff(log_g, axis=0)) / (np.abs(np.log(zs))[None, :] * dx)
    c = float(ratio.max())
    return ConditionResult("log_lipschitz", bool(math.isfinite(c)), f"C = {c:.6g}", c)


def _band_envelope(model: ModelSpec, xs, zs, g_pos, plan: AdmissibilityPlan) -> ConditionResult:
    lo, hi = model.beta_band
    beta = np.asarray(model.beta(np.asarray(xs)), dtype=float)
    if not np.all(np.isfinite(beta)) or beta.min() < lo or beta.max() > hi:
        return ConditionResult(
            "band_envelope", False, f"beta_tilde range [{np.nanmin(beta):.4g}, {np.nanmax(beta):.4g}] leaves beta_band {model.beta_band}"
        )
    small = zs <= plan.r_eps
    envelope = zs[None, small] ** (1.0 / (beta[:, None] + plan.eps))
    excess = np.abs(g_pos[:, small]) - envelope
    ok = bool(np.all(excess <= 0.0))
    return ConditionResult("band_envelope", ok, f"beta_tilde range [{beta.min():.4g}, {beta.max():.4g}]", float(excess.max()))


# ─── Integral constants ───────────────────────────────────────────────────────


def growth_integral(model: ModelSpec, x: float) -> float:
    """∫_{C(0,1)} G(x,z)² dz/z²."""
    if model.jump_zero:
        return 0.0

    def integrand(s: float) -> float:
        z = math.exp(s)
        if z == 0.0:
            return 0.0
        return (float(model.jump_size(x, z)) ** 2 + float(model.jump_size(x, -z)) ** 2) / z

    return quad_checked(integrand, -np.inf, 0.0, what=f"growth integral at x={x}")


def lipschitz_integral(model: ModelSpec, x: float, y: float) -> float:
    """∫_{C(0,1)} (G(x,z) − G(y,z))² dz/z²."""
    if model.jump_zero:
        return 0.0

    def integrand(s: float) -> float:
        z = math.exp(s)
        if z == 0.0:
            return 0.0
        up = float(model.jump_size(x, z)) - float(model.jump_size(y, z))
        down = float(model.jump_size(x, -z)) - float(model.jump_size(y, -z))
        return (up * up + down * down) / z

    return quad_checked(integrand, -np.inf, 0.0, what=f"Lipschitz integral on [{x}, {y}]")


def _is_smooth(e: Expr) -> bool:
    if isinstance(e, Call):
        return e.func not in _NON_SMOOTH and all(_is_smooth(a) for a in e.args)
    if isinstance(e, BinOp):
        return _is_smooth(e.left) and _is_smooth(e.right)
    if isinstance(e, Neg):
        return _is_smooth(e.operand)
    return True


def _hypothesis_check(model: ModelSpec, xs, notes: List[str]) -> bool:
    if model.hypothesis == "none":
        return True
    ok = True
    if not _is_smooth(model.b):
        notes.append("b uses a non-smooth function")
        ok = False
    if model.hypothesis == "case_a":
        beta = np.asarray(model.beta(np.asarray(xs)), dtype=float)
        if beta.min() < 1.0:
            notes.append(f"case_a needs beta_tilde >= 1, found {beta.min():.4g}")
            ok = False
    else:
        try:
            for x in xs:
                compute_btilde(model, x)
        except DivergentIntegralError as exc:
            notes.append(f"case_b: {exc}")
            ok = False
    return ok


# ─── Entry points ─────────────────────────────────────────────────────────────


def check_admissible(model: ModelSpec, plan: Optional[AdmissibilityPlan] = None) -> AdmissibilityReport:
    """Evaluate every condition on the plan's grid; failures go in the report."""
    plan = plan or AdmissibilityPlan()
    xs = np.asarray(plan.xs, dtype=float)
    zs = np.asarray(sorted(plan.zs, reverse=True), dtype=float)
    notes: List[str] = []

    if model.jump_zero:
        conditions = [
            ConditionResult(name, True, "G = 0")
            for name in ("odd_symmetry", "stable_slope", "log_lipschitz", "band_envelope")
        ]
        k0 = k1 = 0.0
    else:
        g_pos = model.jump_size(xs[:, None], zs[None, :])
        g_neg = model.jump_size(xs[:, None], -zs[None, :])
        log_g = _log_sizes(g_pos)
        conditions = [
            _odd_symmetry(g_pos, g_neg, zs),
            _stable_slope(model, xs, zs, log_g, plan),
            _log_lipschitz(xs, zs, log_g),
            _band_envelope(model, xs, zs, g_pos, plan),
        ]
        k0 = k1 = float("nan")
        try:
            k0 = max(growth_integral(model, x) / (1.0 + x * x) for x in xs)
            k1 = max(lipschitz_integral(model, x, y) / (y - x) ** 2 for x, y in zip(xs, xs[1:]))
        except ArithmeticError as exc:
            notes.append(f"integral constants unavailable: {exc}")

    lo, hi = float(xs.min()), float(xs.max())
    sigma_lip = 0.0 if model.sigma is None else estimate_lipschitz(model.sigma, lo, hi, 4 * len(xs))
    drift_lip = estimate_lipschitz(model.b, lo, hi, 4 * len(xs))

    report = AdmissibilityReport(
        conditions=conditions,
        k0=k0,
        k1=k1,
        sigma_lipschitz=sigma_lip,
        drift_lipschitz=drift_lip,
        hypothesis=model.hypothesis,
        hypothesis_ok=_hypothesis_check(model, xs, notes),
        notes=notes,
    )
    if not report.passed:
        logger.warning("[admissibility] failed: %s", ", ".join(report.failures))
    return report
