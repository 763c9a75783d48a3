"""
Tests for the scenario runner, the convergence study and the command line.
"""

import json
import os
import sys

import numpy as np
import pandas as pd
import pytest

# Add parent directory to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

import main
from convergence import check_nested, convergence_study, observed_order
from energy_ledger import LEDGER_COLUMNS
from errors import ConfigurationError, OutputError, SamplingError
from runner import run_scenario
from scenario_config import parse_config
from scenarios import ScenarioLoader


def scenario_config(name, params=None):
    return ScenarioLoader().get_scenario(name, params).config()


class TestRunScenario:
    def test_zero_scenario_outputs(self, tmp_path):
        out = tmp_path / "zero"
        result = run_scenario(scenario_config("zero"), out_dir=str(out))
        assert result.passed
        assert result.failed_checks == []
        ledger = pd.read_csv(out / "ledger.csv")
        assert list(ledger.columns) == LEDGER_COLUMNS
        assert len(ledger) == 17
        summary = json.loads((out / "summary.json").read_text())
        assert summary["status"] == "passed"
        assert set(summary["checks"]) == {"balance", "discrete_inequality", "inequality",
                                          "equivalence", "attainment", "u_only"}
        assert (out / "equivalence.json").exists()
        assert (out / "snapshot_u_t1.txt").exists()
        assert (out / "snapshot_w_t1.txt").exists()

    def test_snapshot_format(self, tmp_path):
        cfg = scenario_config("smooth_uncracked", {"geometry": {"nx": 2, "ny": 2}, "steps": 4})
        run_scenario(cfg, out_dir=str(tmp_path))
        lines = (tmp_path / "snapshot_u_t0.5.txt").read_text().splitlines()
        assert lines[0].startswith("#")
        rows = np.loadtxt(str(tmp_path / "snapshot_u_t0.5.txt"))
        assert rows.shape == (9, 3)
        assert np.allclose(rows[:, :2].min(axis=0), 0.0)
        w_rows = np.loadtxt(str(tmp_path / "snapshot_w_t1.txt"))
        assert w_rows.shape == (8, 4)

    def test_no_checks(self, tmp_path):
        result = run_scenario(scenario_config("zero"), out_dir=str(tmp_path), steps=4, checks=False)
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert "checks" not in summary
        assert summary["n"] == 4
        assert result.passed
        assert not (tmp_path / "checks.json").exists()

    def test_cracked_plate_passes_checks(self, tmp_path):
        params = {"geometry": {"nx": 8, "ny": 8}, "crack": {"points": [[i / 8, 0.5] for i in range(9)]},
                  "steps": 64}
        result = run_scenario(scenario_config("cracked_plate", params), out_dir=str(tmp_path))
        assert result.passed, result.failed_checks
        assert result.summary["released_at_T"] == result.summary["crack_pairs"] == 7

    def test_equivalence_reports_refinement_ratio(self, tmp_path):
        run_scenario(scenario_config("smooth_uncracked", {"steps": 64}), out_dir=str(tmp_path))
        equivalence = json.loads((tmp_path / "equivalence.json").read_text())
        assert equivalence["refined_n"] == 128
        assert 1.6 <= equivalence["ratio"] <= 2.4
        assert equivalence["relative_error"] < 5e-2

    def test_refined_equivalence_can_be_disabled(self, tmp_path):
        cfg = scenario_config("smooth_uncracked", {"steps": 8, "checks": {"equivalence_refined": False}})
        run_scenario(cfg, out_dir=str(tmp_path))
        equivalence = json.loads((tmp_path / "equivalence.json").read_text())
        assert equivalence["ratio"] is None
        assert equivalence["refined_n"] is None

    def test_refined_run_skipped_on_coarse_table(self, tmp_path):
        (tmp_path / "amp.csv").write_text("t,value\n0.0,0.0\n0.25,1.0\n0.5,1.0\n0.75,1.0\n1.0,1.0\n")
        path = tmp_path / "table.toml"
        path.write_text('T = 1.0\nsteps = 4\nbeta = 1.0\n[geometry]\nnx = 2\nny = 2\n'
                        '[materials]\nA = {mu = 1.0}\nB = {mu = 1.0}\n'
                        '[data]\nf = {csv = "amp.csv", profile = "1"}\n')
        run_scenario(parse_config(str(path)), out_dir=str(tmp_path / "out"))
        events = json.loads((tmp_path / "out" / "events.json").read_text())
        assert any(e["message"] == "refined equivalence run skipped" for e in events)
        equivalence = json.loads((tmp_path / "out" / "equivalence.json").read_text())
        assert equivalence["ratio"] is None

    def test_inequality_violation_is_logged(self, tmp_path):
        path = tmp_path / "strict.toml"
        path.write_text('T = 1.0\nsteps = 4\nbeta = 1.0\n[geometry]\nnx = 2\nny = 2\n'
                        '[materials]\nA = {mu = 1.0}\nB = {mu = 1.0}\n'
                        '[data]\nu1 = "sin(pi*x)*sin(pi*y)"\nf = 1.0\n'
                        '[checks]\nslack_tol = -1e9\nu_only = false\n')
        result = run_scenario(parse_config(str(path)), out_dir=str(tmp_path / "out"))
        assert "inequality" in result.failed_checks
        events = json.loads((tmp_path / "out" / "events.json").read_text())
        assert any(e["message"] == "inequality violated" for e in events)

    def test_u_only_skip_is_logged(self, tmp_path):
        result = run_scenario(scenario_config("past_history_demo", {"steps": 4}), out_dir=str(tmp_path))
        events = json.loads((tmp_path / "events.json").read_text())
        assert any(e["message"] == "u-only check skipped" for e in events)
        assert "u_only" not in result.summary["checks"]

    def test_aborted_run_is_logged(self, tmp_path):
        (tmp_path / "amp.csv").write_text("t,value\n0.0,0.0\n1.0,1.0\n")
        path = tmp_path / "coarse.toml"
        path.write_text('T = 1.0\nsteps = 4\nbeta = 1.0\n[geometry]\nnx = 2\nny = 2\n'
                        '[materials]\nA = {mu = 1.0}\nB = {mu = 1.0}\n'
                        '[data]\nf = {csv = "amp.csv", profile = "1"}\n')
        out = tmp_path / "out"
        with pytest.raises(SamplingError):
            run_scenario(parse_config(str(path)), out_dir=str(out))
        events = json.loads((out / "events.json").read_text())
        assert events[-1]["message"].startswith("error: ")
        assert events[-1]["data"]["type"] == "SamplingError"

    def test_unwritable_output(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OutputError):
            run_scenario(scenario_config("zero"), out_dir=str(blocker / "sub"))


class TestConvergence:
    def test_nesting(self):
        assert check_nested([4, 8, 16]) == [4, 8, 16]
        for bad in ([8], [4, 6], [8, 4], [1, 2]):
            with pytest.raises(ConfigurationError):
                check_nested(bad)

    def test_observed_order(self):
        assert observed_order(0.4, 0.1) == pytest.approx(2.0)
        assert observed_order(0.0, 0.1) is None

    def test_zero_study(self, tmp_path):
        report = convergence_study(scenario_config("zero"), [4, 8, 16])
        assert list(report.members["n"]) == [4, 8, 16]
        assert not report.differences[["v_diff", "h_diff", "w_diff"]].to_numpy().any()
        assert report.order("v_diff") == [None]
        paths = report.save(str(tmp_path))
        assert os.path.exists(paths["csv"])
        assert "V diff" in open(paths["report"]).read()

    def test_threads_do_not_change_results(self):
        cfg = scenario_config("smooth_uncracked", {"geometry": {"nx": 2, "ny": 2}})
        serial = convergence_study(cfg, [4, 8, 16], threads=1)
        parallel = convergence_study(cfg, [4, 8, 16], threads=3)
        pd.testing.assert_frame_equal(serial.differences, parallel.differences)
        assert serial.differences["v_diff"].iloc[1] < serial.differences["v_diff"].iloc[0]


    def test_shipped_smooth_scenario_is_first_order(self):
        report = convergence_study(scenario_config("smooth_uncracked"), [16, 32, 64, 128])
        for column in ("v_diff", "h_diff", "w_diff"):
            order = report.order(column)[-1]
            assert order is not None and 0.8 <= order <= 1.3, column
        assert all(ratio < 2.0 for ratio in report.bound_ratios.values())


class TestCommandLine:
    def test_run(self, tmp_path, capsys):
        assert main.main(["run", "zero", "--out", str(tmp_path), "--steps", "4"]) == main.EXIT_OK
        assert "PASS" in capsys.readouterr().out
        assert (tmp_path / "summary.json").exists()

    def test_run_toml_file(self, tmp_path):
        path = tmp_path / "tiny.toml"
        path.write_text('T = 1.0\nsteps = 4\nbeta = 1.0\n[geometry]\nnx = 2\nny = 2\n'
                        '[materials]\nA = {mu = 1.0}\nB = {mu = 1.0}\n')
        assert main.main(["run", str(path), "--out", str(tmp_path / "out"), "--no-checks"]) == main.EXIT_OK

    def test_invalid_input_exit_code(self, tmp_path, capsys):
        path = tmp_path / "bad.toml"
        path.write_text("T = 1.0\nsteps = 4\n")
        assert main.main(["run", str(path)]) == main.EXIT_ERROR
        assert "beta" in capsys.readouterr().err
        assert main.main(["run", "nonexistent"]) == main.EXIT_ERROR

    def test_failed_check_exit_code(self, tmp_path):
        path = tmp_path / "strict.toml"
        path.write_text('T = 1.0\nsteps = 4\nbeta = 1.0\n[geometry]\nnx = 2\nny = 2\n'
                        '[materials]\nA = {mu = 1.0}\nB = {mu = 1.0}\n'
                        '[data]\nu1 = "sin(pi*x)*sin(pi*y)"\nf = 1.0\n'
                        '[checks]\nslack_tol = -1e9\nu_only = false\n')
        assert main.main(["run", str(path), "--out", str(tmp_path / "out")]) == main.EXIT_CHECKS_FAILED

    def test_oracle0d(self, tmp_path):
        out = tmp_path / "oracle.csv"
        assert main.main(["oracle0d", "--b", "0", "--u0", "1", "--T", "1", "--out", str(out)]) == main.EXIT_OK
        frame = pd.read_csv(out)
        assert frame["u"].iloc[-1] == pytest.approx(np.cos(1.0), abs=1e-8)

    def test_converge(self, tmp_path):
        code = main.main(["converge", "zero", "--n-list", "4,8", "--out", str(tmp_path)])
        assert code == main.EXIT_OK
        assert (tmp_path / "convergence.csv").exists()
        assert main.main(["converge", "zero", "--n-list", "4,x"]) == main.EXIT_ERROR

    def test_list(self, capsys):
        assert main.main(["list"]) == main.EXIT_OK
        assert "cracked_plate" in capsys.readouterr().out
