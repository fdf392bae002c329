"""
Multifractal spectra: closed-form evaluators and a box-counting estimator.

Theory mode resolves a point context (σ ≡ 0 or not, β(t), β(t−), δ_t,
jump time or not, strict-local-minimum flags) into one of three shapes:

    DIFFUSION  h·γ on [0, 1/2), 1 at 1/2, −∞ above
    CONT       F_cont(c, γ, h)
    JUMP       F_jump(c₁, c₂, γ₁, γ₂, h)

and records which clause fired. Local spectra on an interval follow the
same split. Empirical mode estimates ĥ_t = 1/(δ̂_t·β(t)) on dyadic grids and
box-counts the level sets of ĥ bin by bin.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.points import DELTA_MAX, PointSystem, approx_rate_grid, dyadic_slope

logger = logging.getLogger(__name__)

NEG_INF = float("-inf")
SYMBOLIC_C1 = "h*gamma2"
BREAK_TOL = 1e-12
DELTA_ONE_TOL = 0.05
UNDEFINED_TOL = 1e-9
LM_WINDOW = 32
LM_TOL = 1e-9

Value = Union[float, str]


def _check_gamma(name: str, gamma: float) -> None:
    if not 0.0 < gamma < 2.0:
        raise ValueError(f"{name} must lie in (0, 2), got {gamma}")


def _at(h: float, breakpoint: float) -> bool:
    return math.isclose(h, breakpoint, rel_tol=0.0, abs_tol=BREAK_TOL)


# ─── Shapes ───────────────────────────────────────────────────────────────────


def f_cont(c: float, gamma: float, h: float) -> float:
    """γh on [0, 1/γ), c at 1/γ, −∞ beyond."""
    _check_gamma("gamma", gamma)
    if h < 0:
        raise ValueError(f"h must be non-negative, got {h}")
    if _at(h, 1.0 / gamma):
        return float(c)
    if h < 1.0 / gamma:
        return gamma * h
    return NEG_INF


def f_jump(c1: Value, c2: float, gamma1: float, gamma2: float, h: float) -> float:
    """γ₁h up to 1/γ₁, then γ₂h up to 1/γ₂, with c₁ and c₂ at the breakpoints."""
    _check_gamma("gamma1", gamma1)
    _check_gamma("gamma2", gamma2)
    if not gamma1 > gamma2:
        raise ValueError(f"need gamma1 > gamma2, got {gamma1} <= {gamma2}")
    if h < 0:
        raise ValueError(f"h must be non-negative, got {h}")
    if _at(h, 1.0 / gamma1):
        return h * gamma2 if c1 == SYMBOLIC_C1 else float(c1)
    if h < 1.0 / gamma1:
        return gamma1 * h
    if _at(h, 1.0 / gamma2):
        return float(c2)
    if h < 1.0 / gamma2:
        return gamma2 * h
    return NEG_INF


def levy_spectrum(beta: float, h: float) -> float:
    """Spectrum of a Lévy process with Brownian part: βh, 1 at 1/2, −∞ above."""
    _check_gamma("beta", beta)
    if h < 0:
        raise ValueError(f"h must be non-negative, got {h}")
    if _at(h, 0.5):
        return 1.0
    return beta * h if h < 0.5 else NEG_INF


# ─── Cases ────────────────────────────────────────────────────────────────────


class CaseKind(str, Enum):
    DIFFUSION = "diffusion"
    CONT = "cont"
    JUMP = "jump"


@dataclass(frozen=True)
class SpectrumCase:
    """A resolved spectrum shape and the clause that produced it."""
    kind: CaseKind
    provenance: str
    gamma: float = float("nan")
    c: float = 1.0
    c1: Value = 1.0
    c2: float = 1.0
    gamma1: float = float("nan")
    gamma2: float = float("nan")

    def __post_init__(self):
        if self.kind is CaseKind.JUMP:
            _check_gamma("gamma1", self.gamma1)
            _check_gamma("gamma2", self.gamma2)
            if not self.gamma1 > self.gamma2:
                raise ValueError("JUMP case needs gamma1 > gamma2")
        else:
            _check_gamma("gamma", self.gamma)

    def evaluate(self, h: float) -> float:
        if self.kind is CaseKind.DIFFUSION:
            return levy_spectrum(self.gamma, h)
        if self.kind is CaseKind.CONT:
            return f_cont(self.c, self.gamma, h)
        return f_jump(self.c1, self.c2, self.gamma1, self.gamma2, h)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value, "provenance": self.provenance}
        if self.kind is CaseKind.JUMP:
            out.update(c1=_jsonable(self.c1), c2=_jsonable(self.c2), gamma1=self.gamma1, gamma2=self.gamma2)
        elif self.kind is CaseKind.CONT:
            out.update(c=_jsonable(self.c), gamma=self.gamma)
        else:
            out.update(gamma=self.gamma)
        return out


def _jsonable(v: Value):
    if isinstance(v, str):
        return v
    return "-inf" if v == NEG_INF else v


@dataclass(frozen=True)
class PointContext:
    sigma_zero: bool
    beta_t: float
    beta_t_minus: float
    delta_t: float = 1.0
    is_jump_time: bool = False
    lm_plus: bool = False
    lm_minus: bool = False


def resolve_case(ctx: PointContext) -> SpectrumCase:
    """Pick the spectrum shape at t from the point context."""
    if not ctx.is_jump_time and ctx.beta_t_minus != ctx.beta_t:
        raise ValueError("inconsistent context: beta(t-) differs from beta(t) at a continuity time")

    if not ctx.sigma_zero:
        return SpectrumCase(CaseKind.DIFFUSION, "diffusion", gamma=max(ctx.beta_t, ctx.beta_t_minus))

    delta_one = abs(ctx.delta_t - 1.0) <= DELTA_ONE_TOL
    if not ctx.is_jump_time or ctx.beta_t == ctx.beta_t_minus:
        if not (ctx.lm_plus and ctx.lm_minus):
            return SpectrumCase(CaseKind.CONT, "cont: not LM", gamma=ctx.beta_t, c=1.0)
        if delta_one:
            return SpectrumCase(CaseKind.CONT, "cont: LM, delta=1", gamma=ctx.beta_t, c=0.0)
        return SpectrumCase(CaseKind.CONT, "cont: LM, delta!=1", gamma=ctx.beta_t, c=NEG_INF)

    beta_max = max(ctx.beta_t, ctx.beta_t_minus)
    beta_min = min(ctx.beta_t, ctx.beta_t_minus)
    rising = ctx.beta_t - ctx.beta_t_minus > 0
    c2_minus = 0.0 if rising and delta_one else NEG_INF
    minus_label = "LM-, rising, delta=1" if c2_minus == 0.0 else "LM-, falling or delta!=1"

    if not ctx.lm_plus:
        if not ctx.lm_minus:
            c1, c2, label = 1.0, 1.0, "jump: no LM"
        else:
            c1, c2, label = 1.0, c2_minus, "jump: " + minus_label
    else:
        if not ctx.lm_minus:
            c1, c2, label = SYMBOLIC_C1, 1.0, "jump: LM+"
        else:
            c1, c2, label = SYMBOLIC_C1, c2_minus, "jump: LM+, " + minus_label
    return SpectrumCase(CaseKind.JUMP, label, c1=c1, c2=c2, gamma1=beta_max, gamma2=beta_min)


def pointwise_spectrum(ctx: PointContext, h: float) -> float:
    return resolve_case(ctx).evaluate(h)


# ─── Local spectrum ───────────────────────────────────────────────────────────


@dataclass
class SpectrumPoint:
    h: float
    d: float
    flag: str = "ok"  # ok | undefined | empty | degenerate

    def to_dict(self) -> dict:
        return {"h": self.h, "d": _jsonable(self.d) if math.isfinite(self.d) or self.d == NEG_INF else None, "flag": self.flag}


@dataclass
class IntervalContext:
    """β samples over an interval and the β values at its jump times (both sides)."""
    sigma_zero: bool
    betas: np.ndarray
    jump_betas: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=float)
        self.jump_betas = np.asarray(self.jump_betas, dtype=float)
        if len(self.betas) == 0:
            raise ValueError("interval context needs at least one beta sample")

    @classmethod
    def from_points(cls, points: Sequence[PointContext]) -> "IntervalContext":
        if not points:
            raise ValueError("no point contexts")
        betas = [b for p in points for b in (p.beta_t, p.beta_t_minus)]
        jumps = [b for p in points if p.is_jump_time for b in (p.beta_t, p.beta_t_minus)]
        return cls(sigma_zero=all(p.sigma_zero for p in points), betas=np.asarray(betas), jump_betas=np.asarray(jumps))


def local_spectrum(ctx: IntervalContext, h: float) -> SpectrumPoint:
    """D(I, h) from the β profile on I."""
    if h < 0:
        raise ValueError(f"h must be non-negative, got {h}")
    if not ctx.sigma_zero:
        d = levy_spectrum(float(ctx.betas.max()), h)
        return SpectrumPoint(h, d, "ok" if d != NEG_INF else "empty")

    if h > 1.0 / float(ctx.betas.min()) + BREAK_TOL:
        return SpectrumPoint(h, NEG_INF, "empty")
    if len(ctx.jump_betas) and np.any(np.abs(h * ctx.jump_betas - 1.0) <= UNDEFINED_TOL):
        return SpectrumPoint(h, float("nan"), "undefined")
    if h == 0.0:
        return SpectrumPoint(h, 0.0)
    admissible = ctx.betas[ctx.betas <= 1.0 / h + BREAK_TOL]
    if len(admissible) == 0:
        logger.warning("[spectrum] no beta sample below 1/h at h=%g", h)
        return SpectrumPoint(h, NEG_INF, "empty")
    return SpectrumPoint(h, h * float(admissible.max()))


def sup_consistency(
    interval: Tuple[float, float],
    h: float,
    t_grid: int,
    ctx_at: Callable[[float], PointContext],
) -> Tuple[float, float]:
    """Local value on the interval next to the sup of pointwise values at t_grid times in it."""
    a, b = interval
    if not a <= b:
        raise ValueError(f"interval {interval} must have a <= b")
    if t_grid < 1:
        raise ValueError("t_grid must be at least 1")
    points = [ctx_at(float(t)) for t in np.linspace(a, b, t_grid)]
    local = local_spectrum(IntervalContext.from_points(points), h).d
    pointwise = max(pointwise_spectrum(p, h) for p in points)
    return local, pointwise


# ─── Strict local minima ──────────────────────────────────────────────────────


@dataclass
class LMDetection:
    is_lm: bool
    flag: str = "ok"  # ok | insufficient


def lm_detect(
    times: np.ndarray,
    betas: np.ndarray,
    t: float,
    side: str,
    window: int = LM_WINDOW,
    tol: float = LM_TOL,
    limit: Optional[float] = None,
) -> LMDetection:
    """
    Whether t is a strict local minimum of the one-sided modified map.

    side="plus" compares samples right of t with the limit from the left,
    side="minus" compares samples left of t with the value at t. `limit`
    overrides the value at t (pass β(t−) for the plus side at a jump time);
    otherwise the sample at t is used, or the nearest sample on the other side.
    """
    if side not in ("plus", "minus"):
        raise ValueError(f"side must be 'plus' or 'minus', got {side!r}")
    if window < 2:
        raise ValueError("window must be at least 2")
    times = np.asarray(times, dtype=float)
    betas = np.asarray(betas, dtype=float)
    left = betas[times < t][-window:]
    right = betas[times > t][:window]
    at = betas[times == t]

    if side == "plus":
        samples = right
        fallback = left[-1] if len(left) else None
    else:
        samples = left
        fallback = right[0] if len(right) else None
    value = limit if limit is not None else (at[0] if len(at) else fallback)

    if len(samples) < 2 or value is None:
        logger.warning("[spectrum] too few samples to test a local minimum at t=%g (%s side)", t, side)
        return LMDetection(False, "insufficient")
    return LMDetection(bool(np.all(value < samples - tol)))


# ─── Curves ───────────────────────────────────────────────────────────────────


@dataclass
class SpectrumCurve:
    samples: List[SpectrumPoint]
    region: Tuple[float, float]
    mode: str = "theory"  # theory | empirical
    provenance: Optional[str] = None
    notes: List[str] = field(default_factory=list)

    def __post_init__(self):
        hs = [p.h for p in self.samples]
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise ValueError("spectrum samples must have strictly increasing h")

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "region": list(self.region),
            "provenance": self.provenance,
            "samples": [p.to_dict() for p in self.samples],
            "notes": self.notes,
        }


def theory_curve(ctx: Union[PointContext, IntervalContext], hs: Sequence[float], region: Tuple[float, float]) -> SpectrumCurve:
    """Pointwise (PointContext) or local (IntervalContext) spectrum on a grid of h."""
    if isinstance(ctx, PointContext):
        case = resolve_case(ctx)
        samples = []
        for h in hs:
            d = case.evaluate(float(h))
            samples.append(SpectrumPoint(float(h), d, "ok" if d != NEG_INF else "empty"))
        return SpectrumCurve(samples, region, "theory", provenance=case.provenance)
    return SpectrumCurve([local_spectrum(ctx, float(h)) for h in hs], region, "theory", provenance="local")


def _beta_on_grid(beta_times: np.ndarray, betas: np.ndarray, ts: np.ndarray) -> np.ndarray:
    idx = np.clip(np.searchsorted(beta_times, ts, side="right") - 1, 0, len(betas) - 1)
    return betas[idx]


def empirical_spectrum(
    ps: PointSystem,
    beta_times: np.ndarray,
    betas: np.ndarray,
    interval: Tuple[float, float],
    h_bins: Sequence[float],
    j_max: int,
    bin_width: float = 0.05,
    sigma_zero: bool = True,
    delta_max: float = DELTA_MAX,
) -> SpectrumCurve:
    """
    Box-counting estimate of D(I, h) at each bin center h.

    At level j the grid is the 2ʲ cell centers of I. δ̂ is taken at
    resolution 2⁻ʲ|I| over marks |Z_n| ≤ (2⁻ʲ|I|)^{h·β(t)}, the part of the
    point system that can still produce exponent h at that scale.
    """
    a, b = interval
    if not 0.0 <= a < b <= ps.horizon:
        raise ValueError(f"interval {interval} outside [0, {ps.horizon}]")
    if j_max < 6:
        raise ValueError(f"j_max must be at least 6, got {j_max}")
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    beta_times = np.asarray(beta_times, dtype=float)
    betas = np.asarray(betas, dtype=float)
    if len(betas) == 0 or len(beta_times) != len(betas):
        raise ValueError("beta samples must be non-empty and aligned with their times")

    width = b - a
    levels = list(range(j_max - 4, j_max + 1))
    notes: List[str] = []
    samples = []
    for h_c in sorted(h_bins):
        counts = []
        for j in levels:
            n = 2 ** j
            ts = a + (np.arange(n) + 0.5) * width / n
            beta_t = _beta_on_grid(beta_times, betas, ts)
            resolution = width / n
            z_max = resolution ** (h_c * beta_t)
            if np.min(z_max) < ps.z_min and not any(f"level {j}" in s for s in notes):
                notes.append(f"level {j}: marks below z_min={ps.z_min:g} needed")
            delta_hat = approx_rate_grid(ps, ts, delta_max, resolution=resolution, z_max=z_max)
            h_hat = 1.0 / (delta_hat * beta_t)
            if not sigma_zero:
                h_hat = np.minimum(h_hat, 0.5)
            in_bin = (h_hat >= h_c - bin_width / 2) & (h_hat < h_c + bin_width / 2)
            counts.append(int(np.count_nonzero(in_bin)))

        if counts[-1] == 0:
            samples.append(SpectrumPoint(float(h_c), NEG_INF, "empty"))
            continue
        populated = [(j, c) for j, c in zip(levels, counts) if c > 0]
        if len(populated) < 2:
            samples.append(SpectrumPoint(float(h_c), float("nan"), "degenerate"))
            continue
        slope, _ = dyadic_slope([j for j, _ in populated], [c for _, c in populated])
        samples.append(SpectrumPoint(float(h_c), min(max(slope, 0.0), 1.0)))

    if notes:
        logger.warning("[spectrum] empirical spectrum truncated: %s", "; ".join(notes))
    return SpectrumCurve(samples, (a, b), "empirical", provenance="box-count", notes=notes)
