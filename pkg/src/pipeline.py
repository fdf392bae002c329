"""
Subcommand orchestration.

Each subcommand reads a validated RunConfig, runs one analysis and writes
its CSV/JSON artifacts into run.output_dir:

    simulate          path.csv, path.jfp, points.csv, ensemble.csv, simulate.json
    points            points.csv, points.json
    holder            holder.csv, holder.json
    spectrum          spectrum.csv, spectrum.json
    tangent           tangent.csv, tangent.json
    band-stats        band.csv, band.json
    check-admissible  admissibility.json
    generator-check   generator.csv, martingale.json

Exit status: 0 on success, 1 for validation failures (ValueError family,
including a model that fails check-admissible), 2 for numerical failures
(ArithmeticError family). Artifacts written by a failed run are removed.

Usage:
    from src.config import load_config
    from src.pipeline import run_subcommand

    summary = run_subcommand("holder", load_config("data/sample/brownian.cfg"))
    summary.status   # 0
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from src.admissibility import AdmissibilityPlan, check_admissible
from src.artifacts import ArtifactWriter, dumps_json, path_frame, points_frame, records_frame
from src.config import RunConfig
from src.generator import generator_consistency, martingale_check
from src.points import (
    approx_rate,
    covering_fraction,
    expected_count,
    level_set_box_dim,
    sample_points,
    shepp_log_partial_sum,
)
from src.regularity import band_statistic_sweep, holder_sweep, value_index
from src.sde import SamplePath, simulate_ensemble, simulate_path
from src.seeds import derive_seed
from src.spectrum import (
    IntervalContext,
    PointContext,
    SpectrumCurve,
    empirical_spectrum,
    lm_detect,
    resolve_case,
    theory_curve,
)
from src.tangent import moment_ratio, tangent_test

logger = logging.getLogger(__name__)

SUBCOMMANDS = (
    "simulate",
    "points",
    "holder",
    "spectrum",
    "tangent",
    "band-stats",
    "check-admissible",
    "generator-check",
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2

# (status, message, details)
Outcome = Tuple[int, str, dict]


@dataclass
class RunSummary:
    """Outcome of one subcommand run."""
    command: str
    status: int
    message: str
    artifacts: List[str] = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == EXIT_OK

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "status": self.status,
            "message": self.message,
            "artifacts": self.artifacts,
            "details": self.details,
        }


class AnalysisPipeline:
    """Runs the subcommands of one configuration."""

    def __init__(self, cfg: RunConfig, progress: bool = False):
        self.cfg = cfg
        self.model = cfg.model_spec()
        self.sim = cfg.sim_config()
        self.seed = cfg.run.master_seed
        self.threads = cfg.run.threads
        self.progress = progress

    # ─── Shared pieces ───────────────────────────────────────────────────────

    def handlers(self) -> Dict[str, Callable[[ArtifactWriter], Outcome]]:
        return {
            "simulate": self.simulate,
            "points": self.points,
            "holder": self.holder,
            "spectrum": self.spectrum,
            "tangent": self.tangent,
            "band-stats": self.band_stats,
            "check-admissible": self.check_admissible,
            "generator-check": self.generator_check,
        }

    def config_doc(self) -> dict:
        """Config without the settings that must not change results."""
        return self.cfg.model_dump(exclude={"run": {"threads", "output_dir"}})

    def _admissibility_plan(self) -> AdmissibilityPlan:
        ac = self.cfg.admissible
        return AdmissibilityPlan(
            xs=tuple(float(v) for v in np.linspace(ac.x_lo, ac.x_hi, ac.n_x)),
            slope_tol=ac.slope_tol,
            eps=ac.eps,
        )

    def _preflight(self) -> None:
        # a failing model still runs; check_admissible logs the failed conditions
        check_admissible(self.model, self._admissibility_plan())

    def _first_path(self):
        """Point system and path of ensemble member 0."""
        ps = sample_points(self.sim.horizon, self.sim.z_min, derive_seed(self.seed, "points", 0))
        path = simulate_path(self.model, ps, self.sim.with_(seed=derive_seed(self.seed, "brownian", 0)))
        return ps, path

    # ─── Subcommands ─────────────────────────────────────────────────────────

    def simulate(self, writer: ArtifactWriter) -> Outcome:
        self._preflight()
        ps, path = self._first_path()
        writer.write_csv("path.csv", path_frame(path))
        if self.cfg.simulate.binary:
            writer.write_path_binary("path.jfp", path)
        writer.write_csv("points.csv", points_frame(ps))

        n_paths = self.cfg.simulate.n_paths
        ens = simulate_ensemble(
            self.model, self.sim, n_paths, seed=self.seed, threads=self.threads,
            record_nodes=True, progress=self.progress,
        )
        ddof = 1 if n_paths > 1 else 0
        writer.write_csv(
            "ensemble.csv",
            pd.DataFrame(
                {
                    "t": ens.nodes,
                    "mean": ens.node_values.mean(axis=0),
                    "var": ens.node_values.var(axis=0, ddof=ddof),
                }
            ),
        )
        details = {
            "path": path.summary(),
            "points": len(ps),
            "ensemble": {
                "n_paths": n_paths,
                "mean_end": float(np.mean(ens.values)),
                "var_end": float(np.var(ens.values, ddof=ddof)),
            },
            "model": self.model.describe(),
            "config": self.config_doc(),
        }
        writer.write_json("simulate.json", details)
        s = details["path"]
        return EXIT_OK, f"{s['nodes']} nodes, {s['jumps']} jumps, M(T)={s['m_end']:.6g}", details

    def points(self, writer: ArtifactWriter) -> Outcome:
        pc = self.cfg.points
        ps = sample_points(self.sim.horizon, self.sim.z_min, derive_seed(self.seed, "points", 0))
        writer.write_csv("points.csv", points_frame(ps))
        details = {
            "count": len(ps),
            "expected_count": expected_count(ps.horizon, ps.z_min),
            "covering": {f"{d:g}": covering_fraction(ps, d, pc.covering_grid) for d in pc.deltas},
            "box_dimensions": {f"{d:g}": level_set_box_dim(ps, d, pc.j_max).to_dict() for d in pc.deltas if d > 1},
            "shepp_log_partial_sums": {
                f"{d:g}": shepp_log_partial_sum(d, pc.shepp_terms, ps.horizon) for d in pc.deltas
            },
            "config": self.config_doc(),
        }
        writer.write_json("points.json", details)
        return EXIT_OK, f"{len(ps)} events (expected {details['expected_count']:.1f})", details

    def holder(self, writer: ArtifactWriter) -> Outcome:
        self._preflight()
        hc = self.cfg.holder
        ps, path = self._first_path()
        margin = self.sim.horizon * 2.0 ** (-hc.j_min)
        times = np.linspace(margin, self.sim.horizon - margin, hc.n_times)
        rows = holder_sweep(
            path, self.model, ps, times, range(hc.j_min, hc.j_max + 1), hc.h_cap, self.cfg.points.delta_max
        )
        writer.write_csv("holder.csv", records_frame(rows, ["t", "h_hat", "r2", "h_theory", "delta_hat", "beta_t"]))

        ok = [r for r in rows if r.flag == "ok"]
        flags: Dict[str, int] = {}
        for r in rows:
            flags[r.flag] = flags.get(r.flag, 0) + 1
        details = {
            "n_times": len(rows),
            "flags": flags,
            "row_flags": [r.flag for r in rows],
            "median_h_hat": float(np.median([r.h_hat for r in ok])) if ok else None,
            "median_abs_error": float(np.median([abs(r.h_hat - r.h_theory) for r in ok])) if ok else None,
            "config": self.config_doc(),
        }
        writer.write_json("holder.json", details)
        median = details["median_h_hat"]
        return EXIT_OK, f"{len(rows)} exponents, median h_hat={median if median is None else round(median, 4)}", details

    def _point_context(self, ps, path: SamplePath, t: float) -> PointContext:
        sc = self.cfg.spectrum
        betas = path.beta_values(self.model)
        idx = value_index(path, t)
        is_jump_time = bool(path.is_jump[idx] and path.grid[idx] == t)
        beta_t = float(betas[idx])
        beta_minus = float(path.beta_left_values(self.model)[idx]) if is_jump_time else beta_t
        return PointContext(
            sigma_zero=self.model.sigma_zero,
            beta_t=beta_t,
            beta_t_minus=beta_minus,
            delta_t=approx_rate(ps, t, self.cfg.points.delta_max).delta_hat,
            is_jump_time=is_jump_time,
            lm_plus=lm_detect(path.grid, betas, t, "plus", sc.lm_window, limit=beta_minus).is_lm,
            lm_minus=lm_detect(path.grid, betas, t, "minus", sc.lm_window).is_lm,
        )

    def _spectrum_point(self, path: SamplePath) -> Optional[float]:
        sc = self.cfg.spectrum
        if sc.point is None:
            return None
        if sc.point != "largest_jump":
            return float(sc.point)
        a, b = sc.interval
        inside = path.is_jump & (path.grid >= a) & (path.grid <= b)
        if not inside.any():
            raise ValueError(f"no jump inside the interval {sc.interval}")
        candidates = np.flatnonzero(inside)
        return float(path.grid[candidates[np.argmax(np.abs(path.jump_marks[candidates]))]])

    def spectrum(self, writer: ArtifactWriter) -> Outcome:
        sc = self.cfg.spectrum
        a, b = sc.interval
        if b > self.sim.horizon:
            raise ValueError(f"spectrum interval {sc.interval} exceeds the horizon {self.sim.horizon}")
        hs = np.linspace(sc.h_min, sc.h_max, sc.n_h)
        ps, path = self._first_path()
        extra: dict = {}

        if sc.mode == "empirical":
            curve: SpectrumCurve = empirical_spectrum(
                ps, path.grid, path.beta_values(self.model), (a, b), hs, sc.j_max,
                sc.bin_width, self.model.sigma_zero, self.cfg.points.delta_max,
            )
        else:
            t = self._spectrum_point(path)
            if t is None:
                inside = (path.grid >= a) & (path.grid <= b)
                jumps = inside & path.is_jump
                betas = path.beta_values(self.model)
                lefts = path.beta_left_values(self.model)
                ctx = IntervalContext(
                    sigma_zero=self.model.sigma_zero,
                    betas=np.concatenate((betas[inside], lefts[inside])),
                    jump_betas=np.concatenate((betas[jumps], lefts[jumps])),
                )
                curve = theory_curve(ctx, hs, (a, b))
            else:
                ctx = self._point_context(ps, path, t)
                curve = theory_curve(ctx, hs, (t, t))
                extra = {"t": t, "case": resolve_case(ctx).to_dict(), "context": ctx.__dict__}

        writer.write_csv("spectrum.csv", pd.DataFrame([p.to_dict() for p in curve.samples], columns=["h", "d", "flag"]))
        details = {"curve": curve.to_dict(), **extra, "config": self.config_doc()}
        writer.write_json("spectrum.json", details)
        return EXIT_OK, f"{sc.mode} spectrum on {len(hs)} points ({curve.provenance})", details

    def tangent(self, writer: ArtifactWriter) -> Outcome:
        self._preflight()
        tc = self.cfg.tangent
        rows = tangent_test(self.model, tc.t0, tc.alpha_seq, tc.n_paths, self.seed, self.sim, self.threads)
        writer.write_csv("tangent.csv", records_frame(rows, ["alpha", "ks", "p"]))
        details = {
            "beta0": rows[0].beta0,
            "rows": [r.to_dict() for r in rows],
            "config": self.config_doc(),
        }
        if tc.gamma is not None:
            moments = moment_ratio(
                self.model, tc.eta, tc.gamma, tc.alpha_seq, tc.n_paths,
                derive_seed(self.seed, "moments"), self.sim, self.threads,
            )
            details["moments"] = [m.to_dict() for m in moments]
        writer.write_json("tangent.json", details)
        last = rows[-1]
        return EXIT_OK, f"beta0={last.beta0:.4g}, KS={last.ks:.4g} (p={last.p:.3g}) at alpha={last.alpha:g}", details

    def band_stats(self, writer: ArtifactWriter) -> Outcome:
        self._preflight()
        bc = self.cfg.band
        stats = band_statistic_sweep(
            self.model, bc.delta, bc.eps, bc.ms, bc.n_paths, self.seed, self.sim, self.threads, self.progress
        )
        writer.write_csv("band.csv", records_frame(stats, ["m", "frequency"]))
        details = {"rows": [s.to_dict() for s in stats], "config": self.config_doc()}
        writer.write_json("band.json", details)
        freqs = ", ".join(f"m={s.m}: {s.frequency:.3g}" for s in stats)
        return EXIT_OK, f"exceedance {freqs}", details

    def check_admissible(self, writer: ArtifactWriter) -> Outcome:
        report = check_admissible(self.model, self._admissibility_plan())
        details = {"report": report.to_dict(), "model": self.model.describe()}
        writer.write_json("admissibility.json", details)
        if report.passed:
            return EXIT_OK, f"admissible (K0={report.k0:.4g}, K1={report.k1:.4g})", details
        return EXIT_INVALID, "not admissible: failed " + ", ".join(report.failures), details

    def generator_check(self, writer: ArtifactWriter) -> Outcome:
        self._preflight()
        gc = self.cfg.generator
        checks = generator_consistency(
            self.model, gc.f, gc.t_seq, gc.n_paths, self.seed, self.sim, self.threads, self.progress
        )
        writer.write_csv("generator.csv", records_frame(checks, ["t", "mc_rate", "generator_value"]))
        mart = martingale_check(
            self.model, gc.martingale_t, gc.n_paths, derive_seed(self.seed, "martingale"),
            self.sim, self.threads, self.progress,
        )
        details = {
            "generator": [c.to_dict() for c in checks],
            "martingale": mart.to_dict(),
            "config": self.config_doc(),
        }
        writer.write_json("martingale.json", details)
        first = checks[0]
        return (
            EXIT_OK,
            f"MC rate {first.mc_rate:.4g} vs generator {first.generator_value:.4g}; "
            f"var Z={mart.var_z:.4g} (predicted {mart.predicted_var:.4g})",
            details,
        )

    # ─── Reporting ───────────────────────────────────────────────────────────

    @staticmethod
    def print_summary(summary: RunSummary, as_json: bool = False) -> None:
        """One line per run, or the whole summary document with as_json."""
        if as_json:
            print(dumps_json(summary.to_dict()), end="")
            return
        label = {EXIT_OK: "ok", EXIT_INVALID: "invalid", EXIT_NUMERICAL: "numerical failure"}[summary.status]
        where = f" -> {len(summary.artifacts)} artifact(s)" if summary.artifacts else ""
        print(f"[{summary.command}] {label}: {summary.message}{where}")


def run_subcommand(
    name: str,
    cfg: RunConfig,
    progress: bool = False,
    as_json: bool = False,
    quiet: bool = False,
) -> RunSummary:
    """Run one subcommand, write its artifacts, print the summary line."""
    writer = ArtifactWriter(cfg.run.output_dir)
    try:
        if name not in SUBCOMMANDS:
            raise ValueError(f"unknown subcommand {name!r}; expected one of {', '.join(SUBCOMMANDS)}")
        pipeline = AnalysisPipeline(cfg, progress=progress)
        logger.info("[pipeline] %s (seed=%d, threads=%d)", name, pipeline.seed, pipeline.threads)
        with writer:
            status, message, details = pipeline.handlers()[name](writer)
        summary = RunSummary(name, status, message, [p.name for p in writer.written], details)
    except ValueError as exc:
        logger.error("[pipeline] %s failed validation: %s", name, exc)
        summary = RunSummary(name, EXIT_INVALID, str(exc))
    except ArithmeticError as exc:
        logger.error("[pipeline] %s failed numerically: %s", name, exc)
        summary = RunSummary(name, EXIT_NUMERICAL, f"{type(exc).__name__}: {exc}")

    if not quiet:
        AnalysisPipeline.print_summary(summary, as_json)
    return summary
