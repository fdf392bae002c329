"""
Pointwise Hölder exponents and the band statistic.

estimate_holder regresses log₂ of the oscillation of M over the windows
[t − 2⁻ʲ, t + 2⁻ʲ] against j; the exponent is minus the slope. Oscillations
include left limits, so a jump inside a window is always seen.

band_statistic measures, per path, the worst normalized increment of the
small-jump part of Z over dyadic pairs at scale 2⁻ᵐ, and reports how often
it exceeds 6m². The endpoint grid is dyadic at level m + 2, which bounds
the gap to the continuum supremum.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import stats
from tqdm import tqdm

from src.model import ModelSpec, SimulationConfig
from src.points import DELTA_MAX, PointSystem, approx_rate, sample_points
from src.quadrature import annulus_integral
from src.sde import SamplePath, compensator_vanishes, simulate_path
from src.seeds import derive_seed

logger = logging.getLogger(__name__)

DEFAULT_J_RANGE = range(6, 12)
H_CAP = 1.5
_SMOOTH_SLOPE = 1.0 - 1e-6
_PAIR_SPAN = 4  # pairs (u_k, u_{k+d}), d ≤ 4, at level m + 2


@dataclass
class HolderEstimate:
    """Regression estimate of the pointwise exponent at t."""
    t: float
    h_hat: float
    r2: float
    scales_used: int
    flag: str = "ok"  # ok | smooth | jump | constant

    def to_dict(self) -> dict:
        return {"t": self.t, "h_hat": self.h_hat, "r2": self.r2, "scales_used": self.scales_used, "flag": self.flag}


@dataclass
class BandEnvelope:
    m: int
    beta_bar: float
    beta_hat: float


@dataclass
class BandStatistic:
    """Exceedance frequency of the band statistic at one level m."""
    m: int
    frequency: float
    exceed: int
    n_paths: int
    median_stat: float

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "frequency": self.frequency,
            "exceed": self.exceed,
            "n_paths": self.n_paths,
            "median_stat": self.median_stat,
        }


@dataclass
class HolderRow:
    t: float
    h_hat: float
    r2: float
    h_theory: float
    delta_hat: float
    beta_t: float
    flag: str = "ok"


# ─── Exponents ────────────────────────────────────────────────────────────────


def oscillation(path: SamplePath, t: float, radius: float) -> float:
    """sup |M_u − M_v| over u, v in [t − radius, t + radius], left limits included."""
    lo = np.searchsorted(path.grid, t - radius, side="left")
    hi = np.searchsorted(path.grid, t + radius, side="right")
    if hi <= lo:
        return 0.0
    right = path.values[lo:hi]
    # a left limit on the window edge itself lies outside
    start = lo + 1 if path.grid[lo] <= t - radius else lo
    left = path.left_values[start:hi]
    top = max(right.max(), left.max()) if len(left) else right.max()
    bottom = min(right.min(), left.min()) if len(left) else right.min()
    return float(top - bottom)


def estimate_holder(
    path: SamplePath,
    t: float,
    j_range: Sequence[int] = DEFAULT_J_RANGE,
    h_cap: float = H_CAP,
) -> HolderEstimate:
    """Oscillation-regression estimate of the Hölder exponent of M at t."""
    levels = list(j_range)
    if len(levels) < 2:
        raise ValueError("j_range needs at least two levels")
    if not path.grid[0] <= t <= path.grid[-1]:
        raise ValueError(f"t={t} outside the path domain [{path.grid[0]}, {path.grid[-1]}]")
    if h_cap <= 0:
        raise ValueError("h_cap must be positive")

    jumps = path.grid[path.is_jump & (path.jump_marks != 0.0)]
    if len(jumps) and np.any(np.abs(jumps - t) <= 1e-15):
        return HolderEstimate(t=t, h_hat=0.0, r2=1.0, scales_used=0, flag="jump")

    osc = np.array([oscillation(path, t, 2.0 ** (-j)) for j in levels])
    usable = osc > 0.0
    if np.count_nonzero(usable) < 2:
        return HolderEstimate(t=t, h_hat=h_cap, r2=1.0, scales_used=int(np.count_nonzero(usable)), flag="constant")

    js = np.asarray(levels, dtype=float)[usable]
    fit = stats.linregress(js, np.log2(osc[usable]))
    h = -float(fit.slope)
    r2 = float(fit.rvalue ** 2) if math.isfinite(fit.rvalue) else 0.0
    if h >= _SMOOTH_SLOPE:
        return HolderEstimate(t=t, h_hat=h_cap, r2=r2, scales_used=len(js), flag="smooth")
    return HolderEstimate(t=t, h_hat=min(max(h, 0.0), h_cap), r2=r2, scales_used=len(js))


def theoretical_exponent(beta_t: float, delta_t: float, sigma_zero: bool) -> float:
    """1/(δ_t β(t)), capped at 1/2 when a Brownian part is present."""
    if not 0.0 < beta_t < 2.0:
        raise ValueError(f"beta_t must lie in (0, 2), got {beta_t}")
    if not delta_t >= 1.0:
        raise ValueError(f"delta_t must be at least 1, got {delta_t}")
    h = 1.0 / (delta_t * beta_t)
    return h if sigma_zero else min(h, 0.5)


def value_index(path: SamplePath, t: float) -> int:
    """Index of the last node at or before t."""
    return int(max(0, np.searchsorted(path.grid, t, side="right") - 1))


def holder_sweep(
    path: SamplePath,
    model: ModelSpec,
    ps: PointSystem,
    times: Sequence[float],
    j_range: Sequence[int] = DEFAULT_J_RANGE,
    h_cap: float = H_CAP,
    delta_max: float = DELTA_MAX,
) -> List[HolderRow]:
    """Estimated and theoretical exponents side by side at each t."""
    betas = path.beta_values(model)
    rows = []
    for t in times:
        est = estimate_holder(path, float(t), j_range, h_cap)
        beta_t = float(betas[value_index(path, t)])
        delta_hat = approx_rate(ps, float(t), delta_max).delta_hat
        if model.jump_zero:
            # Brownian exponent, or a drift-only path with no finite exponent
            h_theory = float("nan") if model.sigma_zero else 0.5
        else:
            h_theory = theoretical_exponent(beta_t, delta_hat, model.sigma_zero)
        rows.append(
            HolderRow(
                t=float(t),
                h_hat=est.h_hat,
                r2=est.r2,
                h_theory=h_theory,
                delta_hat=delta_hat,
                beta_t=beta_t,
                flag=est.flag,
            )
        )
    flagged = sum(1 for r in rows if r.flag != "ok")
    if flagged:
        logger.info("[regularity] %d of %d exponent estimates flagged", flagged, len(rows))
    return rows


# ─── Band envelope and statistic ──────────────────────────────────────────────


def beta_envelope(times: np.ndarray, betas: np.ndarray, s: float, t: float, m: int) -> BandEnvelope:
    """sup β + 2/m over [s, t] and over [s − 2⁻ᵐ, t + 2⁻ᵐ] clipped to the samples."""
    if m < 1:
        raise ValueError("m must be positive")
    times = np.asarray(times, dtype=float)
    betas = np.asarray(betas, dtype=float)
    s, t = min(s, t), max(s, t)
    inside = (times >= s) & (times <= t)
    if not inside.any():
        raise ValueError(f"no beta samples in [{s}, {t}]")
    pad = 2.0 ** (-m)
    lo, hi = max(s - pad, times[0]), min(t + pad, times[-1])
    widened = (times >= lo) & (times <= hi)
    return BandEnvelope(
        m=m,
        beta_bar=float(betas[inside].max()) + 2.0 / m,
        beta_hat=float(betas[widened].max()) + 2.0 / m,
    )


def _small_jump_sum(path: SamplePath, model: ModelSpec, z_min: float, threshold: float, quad_n: int, compensate: bool):
    """Cumulative compensated sum of jumps with |Z_n| < threshold, per node."""
    small = path.is_jump & (np.abs(path.z_marks) < threshold)
    s = np.cumsum(np.where(small, path.jump_marks, 0.0))
    if compensate and threshold > z_min:
        start = np.concatenate(([path.values[0]], path.values[:-1]))
        drift = annulus_integral(model.jump_size, start, z_min, threshold, quad_n)
        dt = np.diff(path.grid, prepend=path.grid[0])
        s = s - np.cumsum(drift * dt)
    return s


def _path_band_stat(
    path: SamplePath, model: ModelSpec, delta: float, eps: float, m: int, cfg: SimulationConfig, compensate: bool
) -> float:
    horizon = path.grid[-1]
    level = m + 2
    n_cells = 2 ** level
    cell = horizon / n_cells
    ends = np.arange(n_cells + 1) * cell
    ends[-1] = horizon

    sums = _small_jump_sum(path, model, cfg.z_min, 2.0 ** (-m / delta), cfg.quad_n, compensate)
    at_end = sums[np.searchsorted(path.grid, ends, side="right") - 1]

    betas = path.beta_values(model)
    cell_of = np.minimum((path.grid / cell).astype(np.int64), n_cells - 1)
    cell_max = np.full(n_cells, -np.inf)
    np.maximum.at(cell_max, cell_of, betas)
    padded = np.concatenate((np.full(_PAIR_SPAN, -np.inf), cell_max, np.full(_PAIR_SPAN, -np.inf)))

    worst = 0.0
    for d in range(1, _PAIR_SPAN + 1):
        increments = np.abs(at_end[d:] - at_end[:-d])
        # cells k−4 .. k+d+3 cover [u_k − 2⁻ᵐ, u_{k+d} + 2⁻ᵐ]
        beta_hat = sliding_window_view(padded, d + 2 * _PAIR_SPAN).max(axis=1)[: len(increments)] + 2.0 / m
        weight = 2.0 ** (m / (delta * (beta_hat + eps)))
        worst = max(worst, float(np.max(weight * increments)))
    return worst


def band_statistic_sweep(
    model: ModelSpec,
    delta: float,
    eps: float,
    ms: Sequence[int],
    n_paths: int,
    seed: int,
    cfg: Optional[SimulationConfig] = None,
    threads: int = 1,
    progress: bool = False,
) -> List[BandStatistic]:
    """Exceedance frequencies of 6m² for every requested m from one ensemble."""
    cfg = cfg or SimulationConfig()
    if not delta > 1:
        raise ValueError(f"delta must exceed 1, got {delta}")
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if not ms or min(ms) < 6:
        raise ValueError("levels m must be at least 6")
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    finest = max(ms)
    if cfg.z_min >= 2.0 ** (-finest / delta):
        raise ValueError(
            f"z_min={cfg.z_min} too large for m={finest}: need z_min < 2^(-m/delta) = {2.0 ** (-finest / delta):.4g}"
        )
    compensate = not compensator_vanishes(model, cfg.z_min, cfg.quad_n)

    def one(i: int) -> List[float]:
        ps = sample_points(cfg.horizon, cfg.z_min, derive_seed(seed, "points", i))
        path = simulate_path(model, ps, cfg.with_(seed=derive_seed(seed, "brownian", i)))
        return [_path_band_stat(path, model, delta, eps, m, cfg, compensate) for m in ms]

    with ThreadPoolExecutor(max_workers=threads) as pool:
        per_path = list(tqdm(pool.map(one, range(n_paths)), total=n_paths, disable=not progress, desc="band"))
    table = np.asarray(per_path).reshape(n_paths, len(ms))

    out = []
    for col, m in enumerate(ms):
        exceed = int(np.count_nonzero(table[:, col] > 6.0 * m * m))
        out.append(
            BandStatistic(
                m=int(m),
                frequency=exceed / n_paths,
                exceed=exceed,
                n_paths=n_paths,
                median_stat=float(np.median(table[:, col])),
            )
        )
        logger.info("[regularity] band m=%d frequency=%.4g", m, exceed / n_paths)
    return out


def band_statistic(
    model: ModelSpec,
    delta: float,
    eps: float,
    m: int,
    n_paths: int,
    seed: int,
    cfg: Optional[SimulationConfig] = None,
    threads: int = 1,
) -> float:
    """Frequency with which the level-m band statistic exceeds 6m²."""
    return band_statistic_sweep(model, delta, eps, [m], n_paths, seed, cfg, threads)[0].frequency
