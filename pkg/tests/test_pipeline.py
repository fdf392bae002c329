"""Tests for the subcommand pipeline and the CLI entry point."""

import json
from pathlib import Path

import pytest

from main import main
from src.config import load_config, load_config_text
from src.pipeline import EXIT_INVALID, EXIT_OK, SUBCOMMANDS, AnalysisPipeline, RunSummary, run_subcommand

SAMPLES = Path(__file__).resolve().parent.parent / "data" / "sample"

STABLE = """
[model]
beta_tilde = 1.2

[sim]
z_min = 0.01

[run]
master_seed = 5

[simulate]
n_paths = 8

[points]
deltas = 1, 2

[holder]
n_times = 5

[spectrum]
n_h = 5

[tangent]
alpha_seq = 0.1
n_paths = 30

[band]
ms = 6
n_paths = 2
"""

BROWNIAN = """
[model]
jump = custom
g = 0
sigma = 1

[sim]
dt = 0.00390625
z_min = 0.01

[spectrum]
n_h = 5

[generator]
t_seq = 0.25
n_paths = 40
martingale_t = 0.5
"""

LEVY_DIFFUSION = """
[model]
beta_tilde = 1.5
sigma = 1

[sim]
dt = 0.00390625
z_min = 0.01

[spectrum]
n_h = 5
"""


def config(text, out):
    return load_config_text(text).with_overrides(output_dir=str(out))


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


class TestSubcommands:
    @pytest.mark.parametrize(
        "command, artifacts",
        [
            ("simulate", ["path.csv", "path.jfp", "points.csv", "ensemble.csv", "simulate.json"]),
            ("points", ["points.csv", "points.json"]),
            ("holder", ["holder.csv", "holder.json"]),
            ("spectrum", ["spectrum.csv", "spectrum.json"]),
            ("tangent", ["tangent.csv", "tangent.json"]),
            ("band-stats", ["band.csv", "band.json"]),
            ("check-admissible", ["admissibility.json"]),
        ],
    )
    def test_artifacts_written(self, tmp_path, command, artifacts):
        summary = run_subcommand(command, config(STABLE, tmp_path), quiet=True)
        assert summary.status == EXIT_OK, summary.message
        assert summary.artifacts == artifacts
        for name in artifacts:
            assert (tmp_path / name).is_file()

    def test_generator_check(self, tmp_path):
        summary = run_subcommand("generator-check", config(BROWNIAN, tmp_path), quiet=True)
        assert summary.ok, summary.message
        assert summary.artifacts == ["generator.csv", "martingale.json"]
        doc = read_json(tmp_path / "martingale.json")
        assert doc["generator"][0]["generator_value"] == pytest.approx(1.0, rel=1e-4)
        assert doc["martingale"]["var_z"] == 0.0

    def test_unknown_subcommand(self, tmp_path):
        summary = run_subcommand("plot", config(STABLE, tmp_path), quiet=True)
        assert summary.status == EXIT_INVALID
        assert "unknown subcommand" in summary.message
        assert summary.artifacts == []

    def test_every_subcommand_has_a_handler(self, tmp_path):
        pipeline = AnalysisPipeline(config(STABLE, tmp_path))
        assert sorted(pipeline.handlers()) == sorted(SUBCOMMANDS)


class TestResults:
    def test_threads_do_not_change_artifacts(self, tmp_path):
        one = config(STABLE, tmp_path / "one")
        four = config(STABLE, tmp_path / "four").with_overrides(threads=4)
        first = run_subcommand("simulate", one, quiet=True)
        second = run_subcommand("simulate", four, quiet=True)
        assert first.artifacts == second.artifacts
        for name in first.artifacts:
            assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "four" / name).read_bytes()

    def test_config_recorded_without_run_settings(self, tmp_path):
        run_subcommand("points", config(STABLE, tmp_path), quiet=True)
        doc = read_json(tmp_path / "points.json")
        assert doc["config"]["run"] == {"master_seed": 5}
        assert set(doc["box_dimensions"]) == {"2"}

    def test_nonsymmetric_model_keeps_report(self, tmp_path):
        cfg = load_config(SAMPLES / "nonsymmetric.cfg").with_overrides(output_dir=str(tmp_path))
        summary = run_subcommand("check-admissible", cfg, quiet=True)
        assert summary.status == EXIT_INVALID
        assert summary.message.startswith("not admissible")
        doc = read_json(tmp_path / "admissibility.json")
        assert doc["report"]["passed"] is False

    def test_levy_with_brownian_part(self, tmp_path):
        summary = run_subcommand("spectrum", config(LEVY_DIFFUSION, tmp_path), quiet=True)
        assert summary.ok, summary.message
        samples = read_json(tmp_path / "spectrum.json")["curve"]["samples"]
        assert [s["h"] for s in samples] == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert samples[1]["d"] == pytest.approx(0.375)
        assert samples[2]["d"] == 1.0
        assert samples[3]["d"] == "-inf"

    def test_spectrum_needs_jumps(self, tmp_path):
        summary = run_subcommand("spectrum", config(BROWNIAN, tmp_path), quiet=True)
        assert summary.status == EXIT_INVALID
        assert not (tmp_path / "spectrum.csv").exists()

    def test_interval_beyond_horizon(self, tmp_path):
        cfg = config(STABLE, tmp_path)
        cfg = cfg.model_copy(update={"spectrum": cfg.spectrum.model_copy(update={"interval": (0.0, 2.0)})})
        summary = run_subcommand("spectrum", cfg, quiet=True)
        assert summary.status == EXIT_INVALID
        assert "exceeds the horizon" in summary.message


class TestReporting:
    def test_summary_line(self, capsys):
        AnalysisPipeline.print_summary(RunSummary("points", 0, "12 events", ["points.csv", "points.json"]))
        assert capsys.readouterr().out == "[points] ok: 12 events -> 2 artifact(s)\n"

    def test_failure_line(self, capsys):
        AnalysisPipeline.print_summary(RunSummary("spectrum", 2, "SimulationBlowUp: t=0.5"))
        assert capsys.readouterr().out == "[spectrum] numerical failure: SimulationBlowUp: t=0.5\n"

    def test_json_summary(self, tmp_path, capsys):
        run_subcommand("check-admissible", config(STABLE, tmp_path), as_json=True)
        doc = json.loads(capsys.readouterr().out)
        assert doc["command"] == "check-admissible"
        assert doc["status"] == 0
        assert doc["artifacts"] == ["admissibility.json"]


class TestMain:
    def test_exit_codes(self, tmp_path, capsys):
        nonsymmetric = str(SAMPLES / "nonsymmetric.cfg")
        assert main(["check-admissible", "--config", nonsymmetric, "--out", str(tmp_path)]) == EXIT_INVALID
        assert capsys.readouterr().out.startswith("[check-admissible] invalid: not admissible")

    def test_invalid_config(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("[model]\nbeta_tilde = 2.5\n", encoding="utf-8")
        assert main(["simulate", "--config", str(bad)]) == EXIT_INVALID
        assert capsys.readouterr().out.startswith("[simulate] invalid:")

    def test_overrides(self, tmp_path, capsys):
        stable = tmp_path / "stable.cfg"
        stable.write_text(STABLE, encoding="utf-8")
        out = tmp_path / "out"
        status = main(["points", "--config", str(stable), "--out", str(out), "--seed", "9", "--json"])
        assert status == EXIT_OK
        assert json.loads(capsys.readouterr().out)["details"]["config"]["run"]["master_seed"] == 9
        assert (out / "points.csv").is_file()

    def test_bad_seed(self, tmp_path):
        with pytest.raises(SystemExit):
            main(["points", "--config", str(tmp_path / "x.cfg"), "--seed", "-1"])
