"""
Pathwise integration of the jump diffusion on a jump-adapted grid.

Scheme: Euler between consecutive grid nodes,

    M ← M + σ(M)·ΔB + (b(M) − c(M))·Δt,

then the exact jump M ← M₋ + G(M₋, Z_n) at each jump time. The grid is the
uniform nodes k·dt merged with the jump times of the point system. c is the
small-jump compensator ∫_{z_min<|z|<1} G(x, z) dz/z², which vanishes for
odd G; it is still evaluated whenever the symmetry check fails.

Brownian values at uniform nodes come from one normal per node. At a jump
time inside a step the value is drawn from the Brownian bridge towards the
next node, with the normal indexed by the event's position in the point
system. Coarser point systems are prefixes of finer ones, so two
truncations of the same seed share every draw they have in common.

Ensembles integrate many paths in lockstep (one numpy column per grid
position) in fixed-size batches, optionally on a thread pool. Batches do not
depend on the thread count, so results do not either.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from src.model import JumpKind, ModelSpec, SimulationConfig
from src.points import PointSystem, is_coupled, sample_points
from src.quadrature import annulus_integral, log_gauss_nodes
from src.seeds import derive_seed, stream_rng

logger = logging.getLogger(__name__)

# symmetry grid for skipping the compensator
_SYMMETRY_X = np.linspace(-5.0, 5.0, 21)


class SimulationBlowUp(ArithmeticError):
    """The state became non-finite."""

    def __init__(self, time: float):
        super().__init__(f"non-finite state at t={time:.6g}")
        self.time = time


class CouplingError(ValueError):
    """Point systems are not truncations of one another."""


@dataclass
class SamplePath:
    """One realization of M on its jump-adapted grid."""
    grid: np.ndarray
    values: np.ndarray
    left_values: np.ndarray
    jump_marks: np.ndarray
    is_jump: np.ndarray
    z_marks: np.ndarray
    uniform_mask: np.ndarray
    x0: float = 0.0
    components: Optional[Dict[str, np.ndarray]] = None

    def __len__(self) -> int:
        return len(self.grid)

    @property
    def jump_times(self) -> np.ndarray:
        return self.grid[self.is_jump]

    def uniform_values(self) -> np.ndarray:
        return self.values[self.uniform_mask]

    def beta_values(self, model: ModelSpec) -> np.ndarray:
        """β(t) = β̃(M(t)) at every node."""
        return np.asarray(model.beta(self.values), dtype=float)

    def beta_left_values(self, model: ModelSpec) -> np.ndarray:
        """β(t−) = β̃(M(t−)) at every node."""
        return np.asarray(model.beta(self.left_values), dtype=float)

    def summary(self) -> dict:
        return {
            "nodes": int(len(self.grid)),
            "jumps": int(np.count_nonzero(self.is_jump)),
            "m_end": float(self.values[-1]),
            "max_abs_jump": float(np.max(np.abs(self.jump_marks))) if len(self.grid) else 0.0,
        }


@dataclass
class EnsembleResult:
    """Terminal values (and optional extras) of an ensemble, in path order."""
    values: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    stopped_values: Optional[np.ndarray] = None
    stop_times: Optional[np.ndarray] = None
    predicted_variance: Optional[np.ndarray] = None
    nodes: Optional[np.ndarray] = None
    node_values: Optional[np.ndarray] = None

    @property
    def n_paths(self) -> int:
        return len(self.values)


# ─── Model-level helpers ──────────────────────────────────────────────────────


def compensator_vanishes(model: ModelSpec, z_min: float, quad_n: int) -> bool:
    """True when G(x,z) + G(x,−z) is exactly zero on the symmetry grid."""
    if model.jump_zero:
        return True
    x = np.append(_SYMMETRY_X, model.x0)[:, None]
    z, _ = log_gauss_nodes(float(z_min), 1.0, int(quad_n))
    both = model.jump_size(x, z) + model.jump_size(x, -z)
    return bool(np.all(both == 0.0))


def compensator_values(model: ModelSpec, x, z_min: float, quad_n: int):
    """Vectorized ∫_{z_min<|z|<1} G(x,z) dz/z² by fixed-node quadrature."""
    return annulus_integral(model.jump_size, x, z_min, 1.0, quad_n)


def jump_variance_density(model: ModelSpec, x, z_min: float, quad_n: int):
    """∫_{z_min<|z|<1} G(x,z)² dz/z²; closed form for the built-in G."""
    if model.jump_zero:
        return np.zeros_like(x, dtype=float) if np.ndim(x) else 0.0
    if model.jump.kind is JumpKind.BUILTIN:
        p = 2.0 / np.asarray(model.beta(x), dtype=float) - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            power = 2.0 * (1.0 - z_min ** p) / p
        out = np.where(np.abs(p) < 1e-12, 2.0 * math.log(1.0 / z_min), power)
        return float(out) if np.ndim(x) == 0 else out
    return annulus_integral(lambda xs, z: model.jump_size(xs, z) ** 2, x, z_min, 1.0, quad_n)


# ─── Path plans ───────────────────────────────────────────────────────────────


@dataclass
class _PathPlan:
    times: np.ndarray
    is_jump: np.ndarray
    marks: np.ndarray
    bridge: np.ndarray
    target_time: np.ndarray
    target_b: np.ndarray
    node_index: np.ndarray
    b_end: float


def _plan_path(ps: PointSystem, nodes: np.ndarray, brownian_seed: int, with_jumps: bool) -> _PathPlan:
    n = len(nodes) - 1
    steps = np.diff(nodes)
    xi = stream_rng(brownian_seed, "brownian").standard_normal(n)
    b_nodes = np.concatenate(([0.0], np.cumsum(np.sqrt(steps) * xi)))

    if with_jumps and len(ps):
        jump_t = np.asarray(ps.times)
        jump_z = np.asarray(ps.marks)
        eta = stream_rng(brownian_seed, "bridge").standard_normal(len(ps))
    else:
        jump_t = jump_z = eta = np.empty(0)
    n_jumps = len(jump_t)

    times = np.concatenate((nodes[1:], jump_t))
    kind = np.concatenate((np.zeros(n, dtype=np.int8), np.ones(n_jumps, dtype=np.int8)))
    rank = np.concatenate((np.arange(n), np.arange(n_jumps)))
    order = np.lexsort((rank, kind, times))

    target = np.concatenate((np.arange(1, n + 1), np.searchsorted(nodes, jump_t, side="left")))
    is_jump = kind.astype(bool)
    node_index = np.where(is_jump, -1, target)
    return _PathPlan(
        times=times[order],
        is_jump=is_jump[order],
        marks=np.concatenate((np.zeros(n), jump_z))[order],
        bridge=np.concatenate((np.zeros(n), eta))[order],
        target_time=nodes[target][order],
        target_b=b_nodes[target][order],
        node_index=node_index[order],
        b_end=float(b_nodes[-1]),
    )


def _stack(plans: List[_PathPlan], horizon: float) -> Dict[str, np.ndarray]:
    width = max(len(p.times) for p in plans)
    out = {
        "times": np.full((len(plans), width), horizon),
        "is_jump": np.zeros((len(plans), width), dtype=bool),
        "marks": np.zeros((len(plans), width)),
        "bridge": np.zeros((len(plans), width)),
        "target_time": np.full((len(plans), width), horizon),
        "target_b": np.zeros((len(plans), width)),
        "node_index": np.full((len(plans), width), -1, dtype=np.int64),
    }
    for row, plan in enumerate(plans):
        k = len(plan.times)
        for key in out:
            out[key][row, :k] = getattr(plan, key)
        out["target_b"][row, k:] = plan.b_end
    return out


# ─── Lockstep integrator ──────────────────────────────────────────────────────


@dataclass
class _BatchOptions:
    z_min: float
    quad_n: int
    x0: float
    n_nodes: int
    record_path: bool = False
    record_nodes: bool = False
    stop_beta_above: Optional[float] = None
    accumulate_variance: bool = False
    compensate: bool = True


def _integrate(model: ModelSpec, plans: List[_PathPlan], horizon: float, opts: _BatchOptions) -> dict:
    cols = _stack(plans, horizon)
    n_paths, width = cols["times"].shape

    m = np.full(n_paths, opts.x0)
    x = np.zeros(n_paths)
    y = np.zeros(n_paths)
    zc = np.zeros(n_paths)
    b = np.zeros(n_paths)
    t_prev = np.zeros(n_paths)
    active = np.ones(n_paths, dtype=bool)
    stopped = np.full(n_paths, np.nan)
    stop_time = np.full(n_paths, np.nan)
    qv = np.zeros(n_paths)

    rec = {}
    if opts.record_path:
        rec = {k: np.empty((n_paths, width)) for k in ("m", "m_left", "jump", "x", "y", "z")}
    node_values = None
    if opts.record_nodes:
        node_values = np.full((n_paths, opts.n_nodes), np.nan)
        node_values[:, 0] = opts.x0

    rows = np.arange(n_paths)
    for j in range(width):
        t = cols["times"][:, j]
        dt = t - t_prev
        jump_col = cols["is_jump"][:, j]

        span = cols["target_time"][:, j] - t_prev
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(span > 0, dt / span, 1.0)
            var = np.where(span > 0, dt * (cols["target_time"][:, j] - t) / span, 0.0)
        bridged = b + frac * (cols["target_b"][:, j] - b) + np.sqrt(np.maximum(var, 0.0)) * cols["bridge"][:, j]
        b_new = np.where(jump_col, bridged, cols["target_b"][:, j])
        db = b_new - b

        sig = model.sigma_at(m)
        drift = model.drift_at(m)
        comp = compensator_values(model, m, opts.z_min, opts.quad_n) if opts.compensate else 0.0
        if opts.accumulate_variance:
            qv = qv + np.where(active, jump_variance_density(model, m, opts.z_min, opts.quad_n) * dt, 0.0)

        # M is recomposed from X + Y + Z so the decomposition holds to rounding
        x_new = x + sig * db
        y_new = y + drift * dt
        z_pre = zc - comp * dt
        m_left = opts.x0 + (x_new + y_new + z_pre)
        jump = np.zeros(n_paths)
        if jump_col.any():
            hit = jump_col & active
            if hit.any():
                jump[hit] = model.jump_size(m_left[hit], cols["marks"][hit, j])

        m_new = m_left + jump
        if not np.all(np.isfinite(m_new)):
            bad = np.flatnonzero(~np.isfinite(m_new))[0]
            raise SimulationBlowUp(float(t[bad]))

        m = np.where(active, m_new, m)
        x = np.where(active, x_new, x)
        y = np.where(active, y_new, y)
        zc = np.where(active, z_pre + jump, zc)
        b = b_new
        t_prev = t

        if opts.record_path:
            rec["m"][:, j] = m
            rec["m_left"][:, j] = np.where(jump_col, m_left, m)
            rec["jump"][:, j] = jump
            rec["x"][:, j] = x
            rec["y"][:, j] = y
            rec["z"][:, j] = zc
        if node_values is not None:
            idx = cols["node_index"][:, j]
            at_node = idx >= 0
            node_values[rows[at_node], idx[at_node]] = m[at_node]
        if opts.stop_beta_above is not None and active.any():
            crossed = active & (np.asarray(model.beta(m)) > opts.stop_beta_above)
            stopped[crossed] = m[crossed]
            stop_time[crossed] = t[crossed]
            active &= ~crossed

    stopped = np.where(np.isnan(stopped), m, stopped)
    stop_time = np.where(np.isnan(stop_time), horizon, stop_time)
    return {
        "m": m, "x": x, "y": y, "z": zc,
        "stopped": stopped, "stop_time": stop_time, "qv": qv,
        "node_values": node_values, "record": rec, "cols": cols,
    }


# ─── Public entry points ──────────────────────────────────────────────────────


def simulate_path(model: ModelSpec, ps: PointSystem, cfg: SimulationConfig) -> SamplePath:
    """Integrate one path driven by `ps`; Brownian draws keyed by cfg.seed."""
    if not math.isclose(ps.horizon, cfg.horizon, rel_tol=0, abs_tol=1e-12):
        raise ValueError(f"point system horizon {ps.horizon} differs from config horizon {cfg.horizon}")
    nodes = cfg.uniform_nodes()
    plan = _plan_path(ps, nodes, cfg.seed, with_jumps=not model.jump_zero)
    opts = _BatchOptions(
        z_min=ps.z_min,
        quad_n=cfg.quad_n,
        x0=model.x0,
        n_nodes=len(nodes),
        record_path=True,
        compensate=_needs_compensator(model, ps.z_min, cfg.quad_n),
    )
    out = _integrate(model, [plan], cfg.horizon, opts)
    rec = out["record"]

    def col(key):
        return np.concatenate(([0.0], rec[key][0]))

    is_jump = np.concatenate(([False], plan.is_jump))
    values = col("m")
    left = col("m_left")
    values[0] = left[0] = model.x0
    return SamplePath(
        grid=np.concatenate(([0.0], plan.times)),
        values=values,
        left_values=left,
        jump_marks=col("jump"),
        is_jump=is_jump,
        z_marks=np.concatenate(([0.0], plan.marks)),
        uniform_mask=~is_jump,
        x0=model.x0,
        components={"x": col("x"), "y": col("y"), "z": col("z")},
    )


_warned_compensator = set()


def _needs_compensator(model: ModelSpec, z_min: float, quad_n: int) -> bool:
    if compensator_vanishes(model, z_min, quad_n):
        return False
    key = (id(model), z_min)
    if key not in _warned_compensator:
        _warned_compensator.add(key)
        logger.warning("[sde] jump coefficient is not odd in z; integrating a non-zero compensator")
    return True


def _batch_size(cfg: SimulationConfig, z_min: float) -> int:
    columns = cfg.n_steps + 2.0 * cfg.horizon * (1.0 / z_min - 1.0)
    return int(max(16, min(512, 2 ** 21 // max(1, int(columns)))))


def simulate_ensemble(
    model: ModelSpec,
    cfg: SimulationConfig,
    n_paths: int,
    seed: Optional[int] = None,
    threads: int = 1,
    record_nodes: bool = False,
    stop_beta_above: Optional[float] = None,
    accumulate_variance: bool = False,
    progress: bool = False,
) -> EnsembleResult:
    """
    Integrate n_paths independent paths.

    Path i uses point seed derive_seed(seed, "points", i) and Brownian seed
    derive_seed(seed, "brownian", i), so its values do not depend on how
    paths are batched or how many threads run.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    if threads < 1:
        raise ValueError("threads must be at least 1")
    seed = cfg.seed if seed is None else seed
    nodes = cfg.uniform_nodes()
    with_jumps = not model.jump_zero
    opts = _BatchOptions(
        z_min=cfg.z_min,
        quad_n=cfg.quad_n,
        x0=model.x0,
        n_nodes=len(nodes),
        record_nodes=record_nodes,
        stop_beta_above=stop_beta_above,
        accumulate_variance=accumulate_variance,
        compensate=_needs_compensator(model, cfg.z_min, cfg.quad_n),
    )
    size = _batch_size(cfg, cfg.z_min)
    batches = [range(start, min(start + size, n_paths)) for start in range(0, n_paths, size)]

    def run(batch: range) -> dict:
        plans = []
        for i in batch:
            ps = (
                sample_points(cfg.horizon, cfg.z_min, derive_seed(seed, "points", i))
                if with_jumps
                else _EMPTY.get(cfg.horizon)
            )
            plans.append(_plan_path(ps, nodes, derive_seed(seed, "brownian", i), with_jumps))
        return _integrate(model, plans, cfg.horizon, opts)

    logger.info("[sde] ensemble of %d paths in %d batches (threads=%d)", n_paths, len(batches), threads)
    result = EnsembleResult(
        values=np.empty(n_paths), x=np.empty(n_paths), y=np.empty(n_paths), z=np.empty(n_paths),
        stopped_values=np.empty(n_paths) if stop_beta_above is not None else None,
        stop_times=np.empty(n_paths) if stop_beta_above is not None else None,
        predicted_variance=np.empty(n_paths) if accumulate_variance else None,
        nodes=nodes if record_nodes else None,
        node_values=np.empty((n_paths, len(nodes))) if record_nodes else None,
    )
    with ThreadPoolExecutor(max_workers=threads) as pool:
        outputs = pool.map(run, batches)
        for batch, out in tqdm(zip(batches, outputs), total=len(batches), disable=not progress, desc="paths"):
            sl = slice(batch.start, batch.stop)
            result.values[sl] = out["m"]
            result.x[sl] = out["x"]
            result.y[sl] = out["y"]
            result.z[sl] = out["z"]
            if stop_beta_above is not None:
                result.stopped_values[sl] = out["stopped"]
                result.stop_times[sl] = out["stop_time"]
            if accumulate_variance:
                result.predicted_variance[sl] = out["qv"]
            if record_nodes:
                result.node_values[sl] = out["node_values"]
    return result


class _EmptySystems:
    """Shared empty point systems for jump-free models."""

    def __init__(self):
        self._cache = {}

    def get(self, horizon: float) -> PointSystem:
        if horizon not in self._cache:
            self._cache[horizon] = PointSystem(np.empty(0), np.empty(0), horizon=horizon, z_min=1.0, seed=0)
        return self._cache[horizon]


_EMPTY = _EmptySystems()


def refine_convergence_systems(model: ModelSpec, systems: Sequence[PointSystem], cfg: SimulationConfig) -> List[float]:
    """Sup-norm gaps at the uniform nodes between consecutive truncations."""
    for coarse, fine in zip(systems, systems[1:]):
        if not is_coupled(coarse, fine):
            raise CouplingError(
                f"systems with z_min {coarse.z_min} and {fine.z_min} are not coupled (seed {coarse.seed} vs {fine.seed})"
            )
    paths = [simulate_path(model, ps, cfg) for ps in systems]
    return [
        float(np.max(np.abs(fine.uniform_values() - coarse.uniform_values())))
        for coarse, fine in zip(paths, paths[1:])
    ]


def refine_convergence(model: ModelSpec, seed: int, z_min_seq: Sequence[float], cfg: SimulationConfig) -> List[float]:
    """Gaps ‖M^(k+1) − M^(k)‖ for coupled truncations z_min_seq of one seed."""
    if len(z_min_seq) < 2:
        raise ValueError("need at least two truncation levels")
    if any(b >= a for a, b in zip(z_min_seq, z_min_seq[1:])):
        raise ValueError(f"z_min_seq must be strictly decreasing, got {list(z_min_seq)}")
    systems = [sample_points(cfg.horizon, z, seed) for z in z_min_seq]
    return refine_convergence_systems(model, systems, cfg.with_(seed=seed))
