"""
Tangent-process checks for the pure-jump stable-like model.

Near t0 the rescaled increments (M_{t0+α} − M_{t0}) / α^{1/β0}, β0 = β̃(M_{t0}),
should look like the marginal S₁ of a symmetric β0-stable Lévy process.
tangent_test compares the two with a two-sample Kolmogorov–Smirnov test
for a decreasing sequence of α. The stable comparator is truncated the way
the rescaled model is: jumps between z_min^{1/β0}·α^{−1/β0} and α^{−1/β0}.

moment_ratio estimates E|M_{α∧τ}|^γ / α, τ the first time β exceeds
β̃(x0) + η; the ratio stays bounded in α for γ in moment_band.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from src.model import JumpKind, ModelSpec, ModelValidationError, SimulationConfig
from src.sde import SamplePath, simulate_ensemble
from src.seeds import derive_seed, stream_rng

logger = logging.getLogger(__name__)

# jumps drawn per chunk in simulate_stable
_STABLE_CHUNK = 1 << 22


@dataclass
class RescaledEnsemble:
    t0: float
    alpha: float
    beta0: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not np.all(np.isfinite(self.samples)):
            raise ArithmeticError("non-finite rescaled increment")


@dataclass
class KSResult:
    statistic: float
    p_value: float


@dataclass
class TangentRow:
    alpha: float
    ks: float
    p: float
    beta0: float

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "ks": self.ks, "p": self.p, "beta0": self.beta0}


@dataclass
class MomentRow:
    alpha: float
    ratio: float
    stopped_fraction: float

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "ratio": self.ratio, "stopped_fraction": self.stopped_fraction}


def _require_pure_jump(model: ModelSpec) -> None:
    if not model.sigma_zero:
        raise ModelValidationError("tangent analysis needs sigma = ZERO")
    if not model.drift_zero:
        raise ModelValidationError("tangent analysis needs b = 0")
    if model.jump.kind is not JumpKind.BUILTIN:
        raise ModelValidationError("tangent analysis needs the builtin stable-like jump")


# ─── Model side ───────────────────────────────────────────────────────────────


def rescaled_increment(path: SamplePath, model: ModelSpec, t0: float, alpha: float) -> float:
    """(M_{t0+α} − M_{t0}) / α^{1/β̃(M_{t0})} read off one path."""
    idx0 = int(np.searchsorted(path.grid, t0, side="right") - 1)
    idx1 = int(np.searchsorted(path.grid, t0 + alpha, side="right") - 1)
    beta0 = float(model.beta(path.values[idx0]))
    return float((path.values[idx1] - path.values[idx0]) / alpha ** (1.0 / beta0))


def rescale_increments(
    model: ModelSpec,
    t0: float,
    alpha: float,
    n_paths: int,
    seed: int,
    cfg: Optional[SimulationConfig] = None,
    threads: int = 1,
) -> RescaledEnsemble:
    """Rescaled increments over [t0, t0 + α] for n_paths independent paths."""
    _require_pure_jump(model)
    cfg = cfg or SimulationConfig()
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if t0 < 0:
        raise ValueError(f"t0 must be non-negative, got {t0}")
    k0 = round(t0 / cfg.dt)
    if t0 > 0 and not math.isclose(k0 * cfg.dt, t0, rel_tol=0.0, abs_tol=1e-12):
        raise ValueError(f"t0={t0} must be a multiple of dt={cfg.dt}")

    run = cfg.with_(horizon=t0 + alpha)
    ens = simulate_ensemble(model, run, n_paths, seed=seed, threads=threads, record_nodes=t0 > 0)
    start = ens.node_values[:, k0] if t0 > 0 else np.full(n_paths, model.x0)
    beta0 = np.asarray(model.beta(start), dtype=float)
    samples = (ens.values - start) / alpha ** (1.0 / beta0)
    return RescaledEnsemble(t0=t0, alpha=alpha, beta0=beta0, samples=samples)


# ─── Stable comparator ────────────────────────────────────────────────────────


def _stable_mass(beta0: float, z_min: float, z_cap: float) -> float:
    """∫_{z_min<|z|<z_cap} β0|z|^{−1−β0} dz."""
    return 2.0 * (z_min ** (-beta0) - z_cap ** (-beta0))


def _check_stable(beta0: float, n_paths: int, z_cap: float, z_min: float, horizon: float) -> None:
    if not 0.0 < beta0 < 2.0:
        raise ValueError(f"beta0 must lie in (0, 2), got {beta0}")
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if not 0.0 < z_min < z_cap:
        raise ValueError(f"need 0 < z_min < z_cap, got z_min={z_min}, z_cap={z_cap}")
    if not horizon > 0:
        raise ValueError("horizon must be positive")


def stable_jump_counts(
    beta0: float, n_paths: int, z_cap: float = 1.0, seed: int = 0, z_min: float = 1e-4, horizon: float = 1.0
) -> np.ndarray:
    """Per-path jump counts of the truncated stable system."""
    _check_stable(beta0, n_paths, z_cap, z_min, horizon)
    mean = horizon * _stable_mass(beta0, z_min, z_cap)
    return stream_rng(seed, "stable-count").poisson(mean, n_paths)


def simulate_stable(
    beta0: float,
    n_paths: int,
    z_cap: float = 1.0,
    seed: int = 0,
    z_min: float = 1e-4,
    horizon: float = 1.0,
) -> np.ndarray:
    """
    Values at `horizon` of a symmetric β0-stable process with jumps on
    z_min < |z| < z_cap (intensity β0|z|^{−1−β0}dz). The compensator vanishes
    by symmetry. Jump sizes invert P(|Z| > m) ∝ m^{−β0} − z_cap^{−β0}.
    """
    counts = stable_jump_counts(beta0, n_paths, z_cap, seed, z_min, horizon)
    size_rng = stream_rng(seed, "stable-size")
    sign_rng = stream_rng(seed, "stable-sign")
    lo, hi = z_cap ** (-beta0), z_min ** (-beta0)

    out = np.zeros(n_paths)
    ends = np.cumsum(counts)
    start_path = 0
    while start_path < n_paths:
        # whole paths per chunk; the streams do not depend on chunk boundaries
        base = ends[start_path - 1] if start_path else 0
        stop_path = int(np.searchsorted(ends, base + _STABLE_CHUNK, side="right"))
        stop_path = max(stop_path, start_path + 1)
        n = int(ends[stop_path - 1] - base)
        sizes = (lo + size_rng.random(n) * (hi - lo)) ** (-1.0 / beta0)
        signs = np.where(sign_rng.random(n) < 0.5, -1.0, 1.0)
        owner = np.repeat(np.arange(start_path, stop_path), counts[start_path:stop_path])
        out[start_path:stop_path] = np.bincount(owner - start_path, weights=signs * sizes, minlength=stop_path - start_path)
        start_path = stop_path
    return out


# ─── Comparison ───────────────────────────────────────────────────────────────


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> KSResult:
    """Two-sample Kolmogorov–Smirnov statistic and asymptotic p-value."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be non-empty")
    res = stats.ks_2samp(a, b, method="asymp")
    return KSResult(statistic=float(res.statistic), p_value=float(res.pvalue))


def tangent_test(
    model: ModelSpec,
    t0: float,
    alpha_seq: Sequence[float],
    n_paths: int,
    seed: int,
    cfg: Optional[SimulationConfig] = None,
    threads: int = 1,
) -> List[TangentRow]:
    """KS distance between rescaled increments and the matched stable law, per α."""
    _require_pure_jump(model)
    cfg = cfg or SimulationConfig()
    if t0 != 0.0:
        raise ValueError("tangent_test compares against one stable law and needs t0 = 0")
    if not alpha_seq:
        raise ValueError("alpha_seq is empty")
    beta0 = float(model.beta(model.x0))

    rows = []
    for i, alpha in enumerate(sorted(alpha_seq, reverse=True)):
        ens = rescale_increments(model, t0, alpha, n_paths, derive_seed(seed, "alpha", i), cfg, threads)
        scale = alpha ** (-1.0 / beta0)
        reference = simulate_stable(
            beta0, n_paths, z_cap=scale, seed=derive_seed(seed, "stable", i), z_min=cfg.z_min ** (1.0 / beta0) * scale
        )
        ks = ks_two_sample(ens.samples, reference)
        logger.info("[tangent] alpha=%g ks=%.4g p=%.4g", alpha, ks.statistic, ks.p_value)
        rows.append(TangentRow(alpha=float(alpha), ks=ks.statistic, p=ks.p_value, beta0=beta0))
    return rows


# ─── Moments ──────────────────────────────────────────────────────────────────


def moment_band(beta0: float, eta: float) -> Tuple[float, float]:
    """Open interval of exponents γ for which E|M_{α∧τ}|^γ = O(α)."""
    if not 0.0 < beta0 < 2.0:
        raise ValueError(f"beta0 must lie in (0, 2), got {beta0}")
    if not eta > 0:
        raise ValueError(f"eta must be positive, got {eta}")
    lo = beta0 + eta
    hi = 2.0 if beta0 >= 1.0 else min(1.0, 2.0 * beta0)
    if not lo < hi:
        raise ValueError(f"empty moment band for beta0={beta0}, eta={eta}")
    return lo, hi


def moment_ratio(
    model: ModelSpec,
    eta: float,
    gamma: float,
    alpha_seq: Sequence[float],
    n_paths: int,
    seed: int,
    cfg: Optional[SimulationConfig] = None,
    threads: int = 1,
) -> List[MomentRow]:
    """E|M_{α∧τ} − x0|^γ / α for each α, τ = inf{t : β(t) > β̃(x0) + η}."""
    cfg = cfg or SimulationConfig()
    if model.jump_zero:
        if not gamma > 0:
            raise ValueError(f"gamma must be positive, got {gamma}")
        stop_above = None
    else:
        beta0 = float(model.beta(model.x0))
        lo, hi = moment_band(beta0, eta)
        if not lo < gamma < hi:
            raise ValueError(f"gamma={gamma} outside the admissible band ({lo:.6g}, {hi:.6g})")
        stop_above = beta0 + eta

    rows = []
    for i, alpha in enumerate(alpha_seq):
        if not alpha > 0:
            raise ValueError(f"alpha must be positive, got {alpha}")
        ens = simulate_ensemble(
            model,
            cfg.with_(horizon=float(alpha)),
            n_paths,
            seed=derive_seed(seed, "alpha", i),
            threads=threads,
            stop_beta_above=stop_above,
        )
        if stop_above is None:
            moment = float(np.mean(np.abs(ens.values - model.x0) ** gamma))
            stopped = 0.0
        else:
            moment = float(np.mean(np.abs(ens.stopped_values - model.x0) ** gamma))
            stopped = float(np.mean(ens.stop_times < alpha))
        rows.append(MomentRow(alpha=float(alpha), ratio=moment / alpha, stopped_fraction=stopped))
    return rows
