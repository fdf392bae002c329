"""
Poisson point system driving the jump term.

The system 𝒫 = (T_n, Z_n) has intensity dt ⊗ dz/z² on [0, horizon] × C(0,1).
It is truncated at |z| ≥ z_min and stored sorted by decreasing |z|.

Sampling uses the series representation: v = 1/|z| − 1 is a homogeneous
Poisson process of rate 2·horizon on [0, 1/z_min − 1), so marks come from
cumulative exponential gaps and are already in decreasing order. A finer
truncation of the same seed extends a coarser one event for event.

Usage:
    from src.points import sample_points, approx_rate

    ps = sample_points(horizon=1.0, z_min=1e-3, seed=7)
    rate = approx_rate(ps, 0.5, delta_max=16)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Union

import numpy as np
from scipy import special, stats

from src.seeds import stream_rng

logger = logging.getLogger(__name__)

DELTA_MAX = 16.0
_GAP_BLOCK = 4096


@dataclass(frozen=True)
class JumpEvent:
    """One atom (T_n, Z_n) of the point system."""
    t: float
    z: float

    def to_dict(self) -> dict:
        return {"t": self.t, "z": self.z}


@dataclass(frozen=True, eq=False)
class PointSystem:
    """Truncated point system, events sorted by decreasing |z|."""
    times: np.ndarray
    marks: np.ndarray
    horizon: float
    z_min: float
    seed: int

    def __post_init__(self):
        self.times.setflags(write=False)
        self.marks.setflags(write=False)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def events(self) -> List[JumpEvent]:
        return [JumpEvent(float(t), float(z)) for t, z in zip(self.times, self.marks)]

    def truncate(self, z_min: float) -> "PointSystem":
        """The coarser system keeping events with |z| ≥ z_min (a prefix)."""
        if z_min < self.z_min:
            raise ValueError(f"cannot refine z_min {self.z_min} down to {z_min}")
        keep = int(np.count_nonzero(np.abs(self.marks) >= z_min))
        return PointSystem(
            times=self.times[:keep].copy(),
            marks=self.marks[:keep].copy(),
            horizon=self.horizon,
            z_min=z_min,
            seed=self.seed,
        )

    def time_order(self) -> np.ndarray:
        """Indices of the events sorted by time (ties keep mark order)."""
        return np.argsort(self.times, kind="stable")


@dataclass
class ApproxRate:
    """Finite-N approximation rate δ̂_t."""
    t: float
    delta_hat: float
    witness: Optional[int] = None

    def to_dict(self) -> dict:
        return {"t": self.t, "delta_hat": self.delta_hat, "witness": self.witness}


@dataclass
class BoxDimension:
    """Box-counting slope with the per-level counts behind it."""
    dimension: float
    levels: List[int]
    counts: List[int]
    flagged: bool = False
    notes: List[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "dimension": round(self.dimension, 6) if math.isfinite(self.dimension) else None,
            "levels": self.levels,
            "counts": self.counts,
            "flagged": self.flagged,
            "notes": self.notes,
        }


def mark_from_uniform(u: Union[float, np.ndarray], z_min: float):
    """Invert P(|Z| > m) = (1/m − 1)/(1/z_min − 1) at a uniform draw u."""
    return 1.0 / (1.0 + u * (1.0 / z_min - 1.0))


def sample_points(horizon: float, z_min: float, seed: int) -> PointSystem:
    """Sample the truncated system; deterministic given (horizon, z_min, seed)."""
    if not horizon > 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    if not 0.0 < z_min <= 1.0:
        raise ValueError(f"z_min must lie in (0, 1], got {z_min}")

    v_max = 1.0 / z_min - 1.0
    rate = 2.0 * horizon
    gap_rng = stream_rng(seed, "gaps")

    # fixed-size blocks keep the cumulative sums identical across truncations
    blocks = []
    reached = 0.0
    while reached < v_max * rate:
        block = -np.log1p(-gap_rng.random(_GAP_BLOCK))
        blocks.append(block)
        reached += float(block.sum())
    arrivals = np.cumsum(np.concatenate(blocks)) / rate if blocks else np.empty(0)
    v = arrivals[arrivals < v_max]
    count = len(v)

    magnitudes = 1.0 / (1.0 + v)
    times = stream_rng(seed, "times").random(count) * horizon
    signs = np.where(stream_rng(seed, "signs").random(count) < 0.5, -1.0, 1.0)

    logger.debug("[points] sampled %d events (horizon=%g, z_min=%g)", count, horizon, z_min)
    return PointSystem(times=times, marks=signs * magnitudes, horizon=horizon, z_min=z_min, seed=seed)


def expected_count(horizon: float, z_min: float) -> float:
    return 2.0 * horizon * (1.0 / z_min - 1.0)


def is_coupled(coarse: PointSystem, fine: PointSystem) -> bool:
    """True when `coarse` is exactly the |z| ≥ coarse.z_min prefix of `fine`."""
    if coarse.seed != fine.seed or coarse.horizon != fine.horizon or coarse.z_min < fine.z_min:
        return False
    n = len(coarse)
    if n > len(fine):
        return False
    if n < len(fine) and abs(fine.marks[n]) >= coarse.z_min:
        return False
    return bool(np.array_equal(coarse.times, fine.times[:n]) and np.array_equal(coarse.marks, fine.marks[:n]))


# ─── Approximation rates ──────────────────────────────────────────────────────


def approx_rate(ps: PointSystem, t: float, delta_max: float = DELTA_MAX) -> ApproxRate:
    """δ̂_t = max(1, max_n log|T_n − t| / log|Z_n|), capped at delta_max."""
    if not delta_max > 1:
        raise ValueError(f"delta_max must exceed 1, got {delta_max}")
    if not 0.0 <= t <= ps.horizon:
        raise ValueError(f"t={t} outside [0, {ps.horizon}]")

    dist = np.abs(ps.times - t)
    size = np.abs(ps.marks)
    candidates = np.flatnonzero((dist < 1.0) & (size < 1.0))
    if len(candidates) == 0:
        return ApproxRate(t=t, delta_hat=1.0, witness=None)

    exact = candidates[dist[candidates] == 0.0]
    if len(exact):
        return ApproxRate(t=t, delta_hat=delta_max, witness=int(exact[0]))

    ratios = np.log(dist[candidates]) / np.log(size[candidates])
    best = int(np.argmax(ratios))
    delta_hat = min(max(1.0, float(ratios[best])), delta_max)
    return ApproxRate(t=t, delta_hat=delta_hat, witness=int(candidates[best]))


def approx_rate_grid(
    ps: PointSystem,
    ts: np.ndarray,
    delta_max: float = DELTA_MAX,
    resolution: float = 0.0,
    z_max: Union[None, float, np.ndarray] = None,
) -> np.ndarray:
    """
    δ̂ for every point of an ascending grid.

    Distances are floored at `resolution` (points closer than that are not
    told apart), and only events with |z| ≤ z_max count; z_max may vary per
    grid point. Only pairs with ratio ≥ 1 matter, i.e. max(d, resolution) ≤ |Z|.
    """
    ts = np.asarray(ts, dtype=float)
    out = np.ones(len(ts))
    if len(ts) == 0 or len(ps) == 0:
        return out

    size = np.abs(ps.marks)
    keep = (size < 1.0) & (size >= resolution)
    if z_max is not None:
        keep &= size <= np.max(z_max)
    centers = ps.times[keep]
    radii = size[keep]
    if len(centers) == 0:
        return out

    lo = np.searchsorted(ts, centers - radii, side="left")
    hi = np.searchsorted(ts, centers + radii, side="right")
    counts = hi - lo
    total = int(counts.sum())
    if total == 0:
        return out

    event = np.repeat(np.arange(len(centers)), counts)
    offsets = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    point = np.repeat(lo, counts) + offsets

    dist = np.maximum(np.abs(centers[event] - ts[point]), resolution)
    with np.errstate(divide="ignore"):
        ratio = np.log(dist) / np.log(radii[event])
    if z_max is not None and np.ndim(z_max) > 0:
        ratio = np.where(radii[event] <= np.asarray(z_max)[point], ratio, 1.0)

    np.maximum.at(out, point, ratio)
    return np.minimum(out, delta_max)


# ─── Coverings and box counting ───────────────────────────────────────────────


def covering_fraction(ps: PointSystem, delta: float, grid_n: int) -> float:
    """Fraction of the grid {horizon·k/grid_n} inside ∪ B(T_n, |Z_n|^delta)."""
    if grid_n < 1:
        raise ValueError("grid_n must be at least 1")
    if len(ps) == 0:
        return 0.0
    grid = ps.horizon * np.arange(grid_n) / grid_n
    radii = np.abs(ps.marks) ** delta
    lo = np.searchsorted(grid, ps.times - radii, side="left")
    hi = np.searchsorted(grid, ps.times + radii, side="right")
    marks = np.zeros(grid_n + 1, dtype=np.int64)
    np.add.at(marks, lo, 1)
    np.add.at(marks, hi, -1)
    covered = np.cumsum(marks[:-1]) > 0
    return float(np.count_nonzero(covered)) / grid_n


def _count_cells(lo: np.ndarray, hi: np.ndarray) -> int:
    """Number of integers covered by the union of [lo_i, hi_i]."""
    if len(lo) == 0:
        return 0
    order = np.argsort(lo, kind="stable")
    lo, hi = lo[order], hi[order]
    reach = np.maximum.accumulate(hi)
    starts = np.ones(len(lo), dtype=bool)
    starts[1:] = lo[1:] > reach[:-1]
    first = np.flatnonzero(starts)
    seg_hi = np.maximum.reduceat(hi, first)
    return int(np.sum(seg_hi - lo[first] + 1))


def dyadic_slope(levels: List[int], counts: List[int]) -> tuple:
    """Slope and r² of log2 N_j against j."""
    fit = stats.linregress(np.asarray(levels, dtype=float), np.log2(np.asarray(counts, dtype=float)))
    return float(fit.slope), float(fit.rvalue ** 2)


def level_set_box_dim(ps: PointSystem, delta: float, j_max: int) -> BoxDimension:
    """
    Box-counting estimate of dim{t : δ_t ≥ delta} over levels j_max−4..j_max.

    At level j the balls resolved at that scale (|Z_n|^delta ≥ 2⁻ʲ·horizon)
    are taken at the cell radius and the cells they meet are counted. The
    raw union of all balls is dense, so counting it would return 1.
    """
    if not delta > 1:
        raise ValueError(f"delta must exceed 1, got {delta}")
    if j_max < 6:
        raise ValueError(f"j_max must be at least 6, got {j_max}")

    result = BoxDimension(dimension=float("nan"), levels=[], counts=[])
    size = np.abs(ps.marks)
    for j in range(j_max - 4, j_max + 1):
        cell = ps.horizon * 2.0 ** (-j)
        if cell ** (1.0 / delta) < ps.z_min:
            result.flagged = True
            result.notes.append(f"level {j} needs marks below z_min")
        resolved = size ** delta >= cell
        centers = ps.times[resolved]
        lo = np.clip(np.floor((centers - cell) / cell), 0, 2 ** j - 1).astype(np.int64)
        hi = np.clip(np.floor((centers + cell) / cell), 0, 2 ** j - 1).astype(np.int64)
        n_cells = _count_cells(lo, hi)
        if n_cells == 0:
            result.flagged = True
            result.notes.append(f"level {j} has no covered cells")
            continue
        result.levels.append(j)
        result.counts.append(n_cells)

    if len(result.levels) >= 2:
        result.dimension, _ = dyadic_slope(result.levels, result.counts)
    else:
        result.flagged = True
    if result.flagged:
        logger.warning("[points] box dimension at delta=%g flagged: %s", delta, "; ".join(result.notes))
    return result


def shepp_log_partial_sum(delta: float, n_terms: int, horizon: float = 1.0) -> float:
    """
    log Σ_{n≤N} n⁻² exp(ℓ_1 + … + ℓ_n) for the mean-field ball lengths.

    ℓ_n = 2|z_n|^delta / horizon with |z_n| = 1/(1 + n/(2·horizon)), the
    typical n-th largest mark. The series diverges (the balls cover the
    circle) exactly when the sum grows without bound in N.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    n = np.arange(1, n_terms + 1, dtype=float)
    lengths = 2.0 * (1.0 / (1.0 + n / (2.0 * horizon))) ** delta / horizon
    log_terms = np.cumsum(np.minimum(lengths, 1.0)) - 2.0 * np.log(n)
    return float(special.logsumexp(log_terms))
