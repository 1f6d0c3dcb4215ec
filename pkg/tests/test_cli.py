import json
import math

import numpy as np
import pytest
from click.testing import CliRunner

from mlqueue.cli import main


@pytest.fixture
def runner():
    return CliRunner()


def cfg_path(config_dir, name="e1"):
    return str(config_dir / f"{name}.yaml")


class TestDensity:
    def test_grid_and_header(self, runner, config_dir, tmp_path):
        out = tmp_path / "o"
        r = runner.invoke(
            main, ["density", "--config", cfg_path(config_dir), "--out-dir", str(out)]
        )
        assert r.exit_code == 0, r.output
        grid = np.genfromtxt(out / "density.csv", delimiter=",", names=True)
        assert grid["cdf"][-1] == pytest.approx(1.0, abs=1e-8)
        assert np.all(np.diff(grid["cdf"]) >= -1e-12)
        head = json.loads((out / "coefficients.json").read_text())
        assert head["d"] == pytest.approx([0.5, 0.5], abs=1e-12)
        assert head["beta"] == [0.0, -1.0]
        assert head["xi"][0] == 1.0

    def test_json_format(self, runner, config_dir, tmp_path):
        out = tmp_path / "o"
        r = runner.invoke(
            main,
            ["density", "--config", cfg_path(config_dir), "--out-dir", str(out), "--format", "json"],
        )
        assert r.exit_code == 0
        grid = json.loads((out / "density.json").read_text())
        assert "pdf" in grid and "cdf" in grid
        assert len(grid["pdf"]) == len(grid["x"])
        head = json.loads((out / "coefficients.json").read_text())
        assert head["d"] == pytest.approx([0.5, 0.5], abs=1e-12)


class TestSimulate:
    def test_outputs(self, runner, config_dir, tmp_path):
        out = tmp_path / "o"
        r = runner.invoke(
            main,
            [
                "simulate", "--config", cfg_path(config_dir), "--n", "25",
                "--events", "60000", "--seed", "3", "--out-dir", str(out),
                "--log-csv", str(tmp_path / "events.csv"), "--log-cap", "5000",
            ],
        )
        assert r.exit_code == 0, r.output
        ecdf = np.genfromtxt(out / "ecdf.csv", delimiter=",", names=True)
        assert abs(ecdf["cdf"][-1] - 1.0) < 1e-9
        assert np.all(ecdf["ci_halfwidth"] >= 0.0)
        summary = json.loads((out / "summary.json").read_text())
        assert summary["n"] == 25
        assert summary["alpha_e"] > 0.5
        assert abs(sum(summary["level_mass"]) - 1.0) < 1e-9
        log = (tmp_path / "events.csv").read_text().splitlines()
        assert log[0].startswith("index,time,kind")
        assert len(log) == 5001

    def test_reproducible_across_invocations(self, runner, config_dir, tmp_path):
        args = [
            "simulate", "--config", cfg_path(config_dir), "--n", "25",
            "--events", "50000", "--seed", "9",
        ]
        r1 = runner.invoke(main, args + ["--out-dir", str(tmp_path / "a")])
        r2 = runner.invoke(main, args + ["--out-dir", str(tmp_path / "b")])
        assert r1.exit_code == r2.exit_code == 0
        s1 = json.loads((tmp_path / "a/summary.json").read_text())
        s2 = json.loads((tmp_path / "b/summary.json").read_text())
        s1.pop("wall_time_s")
        s2.pop("wall_time_s")
        assert s1 == s2
        assert (tmp_path / "a/ecdf.csv").read_text() == (tmp_path / "b/ecdf.csv").read_text()


class TestSde:
    def test_outputs_share_schema(self, runner, config_dir, tmp_path):
        out = tmp_path / "o"
        r = runner.invoke(
            main,
            [
                "sde", "--config", cfg_path(config_dir), "--dt", "1e-3",
                "--horizon", "400", "--seed", "5", "--out-dir", str(out), "--halving",
            ],
        )
        assert r.exit_code == 0, r.output
        ecdf = np.genfromtxt(out / "ecdf.csv", delimiter=",", names=True)
        assert set(ecdf.dtype.names) == {"x", "cdf", "ci_halfwidth"}
        summary = json.loads((out / "summary.json").read_text())
        assert summary["steps"] == 400_000
        assert "halving" in summary


class TestBarcheck:
    def test_report(self, runner, config_dir, tmp_path):
        out = tmp_path / "o"
        r = runner.invoke(
            main,
            [
                "barcheck", "--config", cfg_path(config_dir), "--n", "49",
                "--events", "200000", "--seed", "11", "--out-dir", str(out),
            ],
        )
        assert r.exit_code == 0, r.output
        rep = json.loads((out / "barcheck.json").read_text())
        assert len(rep["residuals"]) == 5
        assert all(row["pass"] for row in rep["residuals"])
        assert rep["palm"]["pass"] is True
        assert rep["moment_bounds"]["pass"] is True


class TestEtaZeta:
    def test_untruncated_closed_form(self, runner, config_dir):
        r = runner.invoke(
            main,
            ["etazeta", "--config", cfg_path(config_dir), "--n", "inf", "--theta", "0.1"],
        )
        assert r.exit_code == 0, r.output
        payload = json.loads(r.output)
        assert payload["eta"] == pytest.approx(math.exp(0.1) - 1.0, abs=1e-10)

    def test_expansion_block_for_finite_n(self, runner, config_dir):
        r = runner.invoke(
            main,
            ["etazeta", "--config", cfg_path(config_dir), "--n", "100", "--theta", "0.1"],
        )
        payload = json.loads(r.output)
        assert payload["expansion_error"]["eta"] < 1e-3


class TestDmcheck:
    def test_exponential(self, runner):
        r = runner.invoke(main, ["dmcheck", "--family", "exponential", "--events", "20000"])
        assert r.exit_code == 0, r.output
        payload = json.loads(r.output)
        assert payload["pass"] is True
        assert payload["max_violation"] < 1e-9

    def test_erlang(self, runner):
        r = runner.invoke(main, ["dmcheck", "--family", "erlang", "--shape", "3", "--events", "10000"])
        assert r.exit_code == 0
        assert json.loads(r.output)["pass"] is True


class TestCompare:
    def test_ecdf_vs_limit(self, runner, config_dir, tmp_path):
        out = tmp_path / "o"
        runner.invoke(
            main,
            [
                "simulate", "--config", cfg_path(config_dir), "--n", "100",
                "--events", "400000", "--seed", "2", "--out-dir", str(out),
            ],
        )
        r = runner.invoke(
            main,
            [
                "compare", "--a", str(out / "ecdf.csv"),
                "--b", f"limit:{cfg_path(config_dir)}",
            ],
        )
        assert r.exit_code == 0, r.output
        rep = json.loads(r.output)
        assert 0.0 < rep["ks"] < 0.2
        assert rep["wasserstein1"] >= 0.0

    def test_self_compare_zero(self, runner, config_dir, tmp_path):
        out = tmp_path / "o"
        runner.invoke(
            main,
            [
                "simulate", "--config", cfg_path(config_dir), "--n", "25",
                "--events", "50000", "--seed", "2", "--out-dir", str(out),
            ],
        )
        r = runner.invoke(
            main, ["compare", "--a", str(out / "ecdf.csv"), "--b", str(out / "ecdf.csv")]
        )
        rep = json.loads(r.output)
        assert rep["ks"] == 0.0


class TestSweep:
    def test_end_to_end(self, runner, config_dir, tmp_path):
        out = tmp_path / "o"
        r = runner.invoke(
            main,
            [
                "sweep", "--config", cfg_path(config_dir), "--n", "25,49",
                "--events-scale", "2000", "--seed", "1", "--out-dir", str(out),
                "--no-sde",
            ],
        )
        assert r.exit_code == 0, r.output
        data = json.loads((out / "sweep.json").read_text())
        assert [row["n"] for row in data["rows"]] == [25, 49]
        assert (out / "sweep.csv").exists()
