"""CLI: config parsing, subcommands, exit codes, byte-identical outputs."""

import csv
import filecmp
import math
import subprocess
import sys

import pytest

from cbdc_portfolio import DEFAULT_SYNTH_TRUTH
from cbdc_portfolio.cli import load_config, main
from cbdc_portfolio.errors import ParameterError, SchemaError

# Frozen twenty-year solution at the default calibration, one row per
# agent/economy pairing in CSV order.
FROZEN_SOLUTION = {
    ("HFL", "pre_cbdc"): (0.25479718571, 0.0537862215109, 0.0),
    ("HFL", "with_cbdc"): (0.256061834408, 0.0283244905233, 0.0241563278282),
    ("LFL", "pre_cbdc"): (0.0, 0.150497350436, 0.0),
    ("LFL", "with_cbdc"): (0.0, 0.0972206869044, 0.0480948708686),
}


def write_config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_rows(path):
    with open(path, newline="") as handle:
        return list(csv.DictReader(handle))


class TestLoadConfig:
    def test_defaults(self):
        config = load_config(None)
        assert config.endowment == 1.0
        assert config.prefs.beta == 0.82
        assert config.prefs.gamma == 0.05
        assert config.prefs.lam == 1.0
        assert config.prefs.sigma == pytest.approx(1.0 / 3.0)
        assert config.returns.r_deposit == pytest.approx(1.0 / 0.82, rel=1e-15)
        assert config.returns.r_cbdc == 1.10
        assert (config.returns.r_risky_high, config.returns.r_risky_low) == (3.77, 0.83)
        assert config.returns.p_high == 0.92
        assert config.income.s_max == config.income.s_min == 1.0
        assert config.income.p_eps == 1.0
        assert len(config.deterministic_grid) == 50
        assert config.deterministic_grid[0] == 0.0
        assert config.deterministic_grid[-1] == 1.25
        assert len(config.stochastic_grid) == 50
        assert (config.stochastic_grid[0], config.stochastic_grid[-1]) == (0.9, -0.9)
        assert config.out_dir == "out"
        assert config.plot is False
        assert config.synth_n_households == 5000
        assert config.truth == DEFAULT_SYNTH_TRUTH

    def test_overrides(self, tmp_path):
        path = write_config(
            tmp_path,
            "# comment and blank lines are skipped\n\n"
            "calibration.gamma = 1.0\n"
            "calibration.lambda = 0.8\n"
            "income.s_max = 1.25\nincome.s_min = 0.5\nincome.p_eps = 0.6666\n"
            "solver.tol_residual = 1e-9\n"
            "output.directory = results\noutput.plot = true\n"
            "synth.truth.const = -1.5\nsynth.truth.policy_x_score = 0.2\n",
        )
        config = load_config(path)
        assert config.prefs.gamma == 1.0
        assert config.prefs.lam == 0.8
        assert (config.income.s_max, config.income.s_min) == (1.25, 0.5)
        assert config.income.p_eps == 0.6666
        assert config.solver.tol_residual == 1e-9
        assert config.out_dir == "results"
        assert config.plot is True
        assert config.truth == {"const": -1.5, "policy_x_score": 0.2}

    def test_unknown_key(self, tmp_path):
        with pytest.raises(SchemaError, match="unknown config key"):
            load_config(write_config(tmp_path, "calibration.betta = 0.9\n"))

    def test_duplicate_key(self, tmp_path):
        with pytest.raises(SchemaError, match="duplicate"):
            load_config(write_config(tmp_path, "calibration.beta=0.8\ncalibration.beta=0.9\n"))

    def test_bad_value(self, tmp_path):
        with pytest.raises(SchemaError, match="invalid value"):
            load_config(write_config(tmp_path, "calibration.beta = lots\n"))

    def test_bad_bool(self, tmp_path):
        with pytest.raises(SchemaError, match="true or false"):
            load_config(write_config(tmp_path, "output.plot = yes\n"))

    def test_line_without_equals(self, tmp_path):
        with pytest.raises(SchemaError, match="key=value"):
            load_config(write_config(tmp_path, "calibration.beta 0.9\n"))

    def test_missing_file(self):
        with pytest.raises(SchemaError, match="cannot read"):
            load_config("/nonexistent/run.cfg")

    def test_income_conflict(self, tmp_path):
        text = "income.s = 1.0\nincome.s_max = 1.25\nincome.s_min = 0.5\nincome.p_eps = 0.5\n"
        with pytest.raises(SchemaError, match="conflicts"):
            load_config(write_config(tmp_path, text))

    def test_partial_income_triple(self, tmp_path):
        with pytest.raises(SchemaError, match="income.p_eps"):
            load_config(write_config(tmp_path, "income.s_max = 1.25\nincome.s_min = 0.5\n"))

    def test_partial_grid(self, tmp_path):
        with pytest.raises(SchemaError, match="sweep.s_points"):
            load_config(write_config(tmp_path, "sweep.s_start = 0\nsweep.s_stop = 1\n"))

    def test_single_point_grid(self, tmp_path):
        path = write_config(
            tmp_path, "sweep.s_start = 0.7\nsweep.s_stop = 9.9\nsweep.s_points = 1\n"
        )
        assert load_config(path).deterministic_grid == (0.7,)

    def test_invariants_checked_at_parse_time(self, tmp_path):
        with pytest.raises(ParameterError):
            load_config(write_config(tmp_path, "calibration.beta = 1.5\n"))

    def test_empty_truth_name(self, tmp_path):
        with pytest.raises(SchemaError, match="coefficient name"):
            load_config(write_config(tmp_path, "synth.truth. = 1.0\n"))


class TestCalibrateCommand:
    def test_default_lattice_and_summary(self, tmp_path, capsys):
        assert main(["calibrate", "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "calibration.csv")
        assert len(rows) == 21
        by_n = {int(r["n"]): r for r in rows}
        # Truncated views of the first rows match the published table.
        assert math.floor(float(by_n[1]["probability"]) * 1e3) / 1e3 == 0.377
        assert math.floor(float(by_n[1]["compounded_return"]) * 1e2) / 1e2 == 3.08
        assert sum(float(r["probability"]) for r in rows) == pytest.approx(1.0, abs=1e-12)

        summary = dict(
            line.split("=", 1) for line in capsys.readouterr().out.strip().splitlines()
        )
        assert float(summary["p_a"]) == pytest.approx(0.9245163262, abs=1e-9)
        assert float(summary["r_high"]) == pytest.approx(3.7788851663, abs=1e-9)
        assert float(summary["r_low"]) == pytest.approx(0.8371219094, abs=1e-9)
        assert float(summary["equity_premium"]) == pytest.approx(0.0555, abs=1e-12)
        # Values are serialized at 12 significant digits.
        assert float(summary["r_deposit_annual"]) == pytest.approx(
            (1.0 / 0.82) ** (1.0 / 20.0), abs=1e-11
        )
        assert float(summary["r_cbdc_annual"]) == pytest.approx(1.10 ** (1.0 / 20.0), abs=1e-11)

    def test_no_crisis_limit_degenerates(self, tmp_path, capsys):
        config = write_config(tmp_path, "annual.p_high = 1.0\n")
        assert main(["calibrate", "--config", config, "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "calibration.csv")
        assert len(rows) == 1
        assert int(rows[0]["n"]) == 0
        assert float(rows[0]["probability"]) == 1.0
        out = capsys.readouterr().out
        assert "p_a=" not in out and "r_low=" not in out
        summary = dict(line.split("=", 1) for line in out.strip().splitlines())
        assert float(summary["equity_premium"]) == pytest.approx(0.08, abs=1e-12)


class TestSolveCommand:
    def test_reproduces_frozen_baseline(self, tmp_path):
        assert main(["solve", "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "solution.csv")
        assert len(rows) == 4
        for row in rows:
            a, d, m = FROZEN_SOLUTION[row["agent"], row["economy"]]
            assert row["converged"] == "true"
            assert float(row["a"]) == pytest.approx(a, abs=1e-9)
            assert float(row["d"]) == pytest.approx(d, abs=1e-9)
            assert float(row["m"]) == pytest.approx(m, abs=1e-9)

    def test_all_infeasible_exits_3(self, tmp_path, capsys):
        config = write_config(tmp_path, "income.s = -5.0\n")
        assert main(["solve", "--config", config, "--out", str(tmp_path)]) == 3
        assert "error:" in capsys.readouterr().err
        rows = read_rows(tmp_path / "solution.csv")
        assert all(row["converged"] == "false" for row in rows)


class TestSweepCommand:
    def test_deterministic_outputs_and_determinism(self, tmp_path):
        config = write_config(
            tmp_path, "sweep.s_start = 0.4\nsweep.s_stop = 1.2\nsweep.s_points = 5\n"
        )
        for name in ("first", "second"):
            out = tmp_path / name
            code = main(
                ["sweep", "deterministic", "--config", config, "--out", str(out), "--plot"]
            )
            assert code == 0
        first, second = tmp_path / "first", tmp_path / "second"
        assert filecmp.cmp(first / "sweep_deterministic.csv", second / "sweep_deterministic.csv", shallow=False)
        assert filecmp.cmp(first / "sweep_deterministic.svg", second / "sweep_deterministic.svg", shallow=False)
        rows = read_rows(first / "sweep_deterministic.csv")
        assert len(rows) == 4 * 5
        assert all(row["converged"] == "true" for row in rows)

    def test_single_point_sweep_matches_solve(self, tmp_path):
        config = write_config(
            tmp_path, "sweep.s_start = 1.0\nsweep.s_stop = 1.0\nsweep.s_points = 1\n"
        )
        assert main(["sweep", "deterministic", "--config", config, "--out", str(tmp_path)]) == 0
        assert main(["solve", "--out", str(tmp_path)]) == 0
        sweep_rows = read_rows(tmp_path / "sweep_deterministic.csv")
        solve_rows = read_rows(tmp_path / "solution.csv")
        assert len(sweep_rows) == len(solve_rows) == 4
        for s_row, v_row in zip(sweep_rows, solve_rows):
            assert (s_row["agent"], s_row["economy"]) == (v_row["agent"], v_row["economy"])
            for column in ("a", "d", "m", "c1"):
                assert float(s_row[column]) == pytest.approx(float(v_row[column]), abs=1e-12)

    def test_partial_infeasibility_is_recorded_not_fatal(self, tmp_path):
        config = write_config(
            tmp_path, "sweep.s_start = 1.0\nsweep.s_stop = -5.0\nsweep.s_points = 2\n"
        )
        assert main(["sweep", "deterministic", "--config", config, "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "sweep_deterministic.csv")
        failed = [row for row in rows if row["converged"] == "false"]
        assert len(failed) == 4
        for row in failed:
            assert row["a"] == row["d"] == row["m"] == row["c1"] == ""

    def test_every_point_infeasible_exits_3(self, tmp_path, capsys):
        config = write_config(
            tmp_path, "sweep.s_start = -5.0\nsweep.s_stop = -6.0\nsweep.s_points = 2\n"
        )
        assert main(["sweep", "deterministic", "--config", config, "--out", str(tmp_path)]) == 3
        assert "infeasible" in capsys.readouterr().err

    def test_stochastic_plot_from_config_flag(self, tmp_path):
        config = write_config(
            tmp_path,
            "sweep.s_min_start = 0.5\nsweep.s_min_stop = -0.5\nsweep.s_min_points = 3\n"
            "output.plot = true\n",
        )
        assert main(["sweep", "stochastic", "--config", config, "--out", str(tmp_path)]) == 0
        assert (tmp_path / "sweep_stochastic.csv").exists()
        assert (tmp_path / "sweep_stochastic.svg").exists()

    def test_cbdc_return_default_grid(self, tmp_path):
        assert main(["sweep", "cbdc-return", "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "sweep_cbdc_return.csv")
        parameters = sorted({float(row["sweep_parameter"]) for row in rows})
        assert parameters == [1.00, 1.10, 1.15, 1.20]
        assert len(rows) == 8  # with-CBDC economy only, two agents

    def test_cbdc_return_at_deposit_rate_equalizes_liquid_holdings(self, tmp_path):
        r_deposit = 1.0 / 0.82
        config = write_config(
            tmp_path,
            f"sweep.r_cbdc_start = 1.0\nsweep.r_cbdc_stop = {r_deposit!r}\n"
            "sweep.r_cbdc_points = 3\n",
        )
        assert main(["sweep", "cbdc-return", "--config", config, "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "sweep_cbdc_return.csv")
        top = max(float(row["sweep_parameter"]) for row in rows)
        assert top == pytest.approx(r_deposit, abs=1e-11)
        endpoint = [row for row in rows if float(row["sweep_parameter"]) == top]
        assert len(endpoint) == 2
        for row in endpoint:
            assert abs(float(row["d"]) - float(row["m"])) <= 1e-6


class TestEstimateCommand:
    @pytest.fixture()
    def panel_path(self, tmp_path):
        config = write_config(tmp_path, "synth.n_households = 600\nsynth.seed = 4\n")
        assert main(["synth", "--config", config, "--out", str(tmp_path)]) == 0
        return str(tmp_path / "panel.csv")

    def test_estimates_csv(self, tmp_path, panel_path):
        assert main(["estimate", panel_path, "--out", str(tmp_path)]) == 0
        rows = read_rows(tmp_path / "estimates.csv")
        names = [row["name"] for row in rows]
        assert names[:3] == ["const", "policy", "policy_x_score"]
        assert len(names) == 11  # 6 structural terms + 5 controls
        for row in rows:
            assert float(row["odds_change"]) == pytest.approx(
                math.expm1(float(row["estimate"])), rel=1e-10
            )

    def test_wald_line_format(self, tmp_path, panel_path, capsys):
        code = main(
            [
                "estimate",
                panel_path,
                "--out",
                str(tmp_path),
                "--spec",
                "dummies",
                "--wald",
                "policy_x_score_3",
                "policy_x_score_1",
            ]
        )
        assert code == 0
        out = capsys.readouterr().out.strip()
        import re

        assert re.fullmatch(
            r"one-sided wald policy_x_score_3 > policy_x_score_1: z=-?\d+\.\d{4} p=[01]\.\d{3}",
            out,
        )

    def test_unknown_wald_name_exits_2(self, tmp_path, panel_path, capsys):
        code = main(
            ["estimate", panel_path, "--out", str(tmp_path), "--wald", "nope", "const"]
        )
        assert code == 2
        assert "no coefficient named" in capsys.readouterr().err

    def test_empty_panel_exits_2(self, tmp_path, capsys):
        empty = tmp_path / "empty.csv"
        empty.write_text("")
        assert main(["estimate", str(empty), "--out", str(tmp_path)]) == 2
        assert "empty" in capsys.readouterr().err

    def test_header_only_panel_exits_2(self, tmp_path, capsys):
        stub = tmp_path / "stub.csv"
        stub.write_text("household_id,year,outcome,literacy_score\n")
        assert main(["estimate", str(stub), "--out", str(tmp_path)]) == 2
        assert "no rows" in capsys.readouterr().err

    def test_missing_column_exits_2(self, tmp_path, capsys):
        stub = tmp_path / "stub.csv"
        stub.write_text("household_id,year,outcome\n1,1,0\n1,2,1\n")
        assert main(["estimate", str(stub), "--out", str(tmp_path)]) == 2
        assert "literacy_score" in capsys.readouterr().err

    def test_separation_exits_4(self, tmp_path, capsys):
        # Outcome identical to the policy dummy separates perfectly.
        lines = ["household_id,year,outcome,literacy_score"]
        for household in range(40):
            lines.append(f"{household},1,0,{household % 4}")
            lines.append(f"{household},2,1,{household % 4}")
        path = tmp_path / "separated.csv"
        path.write_text("\n".join(lines) + "\n")
        assert main(["estimate", str(path), "--out", str(tmp_path)]) == 4
        assert "separated" in capsys.readouterr().err


class TestSynthCommand:
    def test_deterministic_given_seed(self, tmp_path):
        for name in ("first", "second"):
            assert main(["synth", "--seed", "7", "--out", str(tmp_path / name)]) == 0
        assert filecmp.cmp(
            tmp_path / "first" / "panel.csv", tmp_path / "second" / "panel.csv", shallow=False
        )
        assert main(["synth", "--seed", "8", "--out", str(tmp_path / "third")]) == 0
        assert not filecmp.cmp(
            tmp_path / "first" / "panel.csv", tmp_path / "third" / "panel.csv", shallow=False
        )

    def test_flag_overrides_config_seed(self, tmp_path):
        config = write_config(tmp_path, "synth.seed = 1\nsynth.n_households = 50\n")
        assert main(["synth", "--config", config, "--seed", "2", "--out", str(tmp_path / "a")]) == 0
        assert main(["synth", "--seed", "2", "--out", str(tmp_path / "b")]) == 0
        # Same seed, different n -> files differ; same seed and n -> equal.
        config_b = write_config(tmp_path, "synth.n_households = 50\n", name="b.cfg")
        assert main(["synth", "--config", config_b, "--seed", "2", "--out", str(tmp_path / "c")]) == 0
        assert filecmp.cmp(tmp_path / "a" / "panel.csv", tmp_path / "c" / "panel.csv", shallow=False)

    def test_round_trips_through_estimate(self, tmp_path):
        config = write_config(tmp_path, "synth.n_households = 400\n")
        assert main(["synth", "--config", config, "--out", str(tmp_path)]) == 0
        panel = str(tmp_path / "panel.csv")
        assert main(["estimate", panel, "--out", str(tmp_path)]) == 0
        assert (tmp_path / "estimates.csv").exists()


class TestExitCodesAndScript:
    def test_config_error_exits_2(self, tmp_path, capsys):
        config = write_config(tmp_path, "nope = 1\n")
        assert main(["solve", "--config", config, "--out", str(tmp_path)]) == 2
        assert "unknown config key" in capsys.readouterr().err

    def test_invariant_violation_exits_2(self, tmp_path, capsys):
        config = write_config(tmp_path, "calibration.beta = 1.5\n")
        assert main(["solve", "--config", config, "--out", str(tmp_path)]) == 2
        assert "error:" in capsys.readouterr().err

    def test_console_script_help(self):
        result = subprocess.run(
            [sys.executable, "-m", "cbdc_portfolio.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0
        assert "calibrate" in result.stdout and "estimate" in result.stdout

    def test_console_script_rejects_unknown_subcommand(self):
        result = subprocess.run(
            [sys.executable, "-m", "cbdc_portfolio.cli", "bogus"],
            capture_output=True,
            text=True,
        )
        assert result.returncode == 2
