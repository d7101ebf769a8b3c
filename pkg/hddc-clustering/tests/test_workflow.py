"""
Benchmark graph: simulate, fit, evaluate and report.
"""
import json
import math
from pathlib import Path

import pandas as pd
import pytest

import src.tools.data_io as data_io
from src.errors import InvalidInputError
from src.graph.workflow import run_benchmark
from src.stages.evaluation_stage import EvaluationStage, aggregate, plot_points
from src.stages.simulation_stage import SimulationStage
from src.utils.reporting import PLOT_COLUMNS


def _record(x, method, status="ok", **metrics):
    return {"job": 0, "x": x, "replication": 0, "method": method, "status": status, "error": "", **metrics}


class TestAggregate:

    def test_mean_and_failures(self):
        fits = [
            _record(20, "HDDC", recognition=0.9),
            _record(20, "HDDC", recognition=0.7),
            _record(20, "Full-GMM", status="failed"),
            _record(40, "HDDC", recognition=1.0),
        ]
        rows = aggregate(fits, "recognition")
        assert [(r["x"], r["method"]) for r in rows] == [(20, "HDDC"), (20, "Full-GMM"), (40, "HDDC")]
        assert rows[0]["mean"] == pytest.approx(0.8)
        assert rows[0]["runs"] == 2
        assert rows[1]["failed"] == 1 and math.isnan(rows[1]["mean"])

    def test_plot_points(self):
        rows = aggregate([_record(150, "HDDC", condition=12.0)], "condition")
        assert plot_points(rows) == [{"x": 150, "method": "HDDC", "y": 12.0}]

    def test_crabs_table_keeps_failed_methods(self):
        state = {
            "suite": "crabs",
            "status": "fitted",
            "fits": [
                _record("crabs", "HDDC [a_i b_i Q_i d_i]", recognition=0.95, dims=[1, 1, 1, 1], bic=10.0),
                _record("crabs", "Sphe-GMM", status="failed"),
            ],
        }
        state = EvaluationStage().process(state)
        assert state["status"] == "evaluated"
        table = state["tables"]["crabs"]
        assert table[0]["dims"] == "1,1,1,1"
        assert math.isnan(table[1]["recognition"])

    def test_full_rank_condition_curve_keeps_two_methods(self):
        methods = ["HDDC [a_ij b_i Q_i d_i]", "Full-GMM", "Diag-GMM", "Sphe-GMM"]
        state = {
            "suite": "full-rank",
            "status": "fitted",
            "fits": [_record(150, m, recognition=0.8, condition=5.0 + i) for i, m in enumerate(methods)],
        }
        state = EvaluationStage().process(state)
        assert [row["method"] for row in state["tables"]["full_rank"]] == methods
        assert [point["method"] for point in state["plots"]["condition_vs_n"]] == methods[:2]
        assert len(state["plots"]["recognition_vs_n"]) == 4


class TestSimulationStage:

    def test_full_rank_plan_compares_four_methods(self):
        state = {"suite": "full-rank", "seed": 0, "replications": 1, "restarts": 1, "quick": True}
        jobs = SimulationStage()._plan_full_rank(state)
        assert [job["x"] for job in jobs] == [150, 500]
        labels = [method.label for method in jobs[0]["methods"]]
        assert labels == ["HDDC [a_ij b_i Q_i d_i]", "Full-GMM", "Diag-GMM", "Sphe-GMM"]


class TestRunBenchmark:

    def test_quick_dimension_sweep(self, tmp_path):
        result = run_benchmark("dimension-sweep", seed=3, replications=1, restarts=1, quick=True,
                               output_dir=str(tmp_path), jobs=2)
        assert result["status"] == "completed"
        assert len(result["jobs"]) == 2
        assert len(result["fits"]) == 10

        names = {Path(a).name for a in result["artifacts"]}
        assert {
            "dimension-sweep_dimension_sweep.tsv",
            "dimension-sweep_recognition_vs_p.plot.tsv",
            "dimension-sweep_bic_vs_p.plot.tsv",
            "dimension-sweep_fits.json",
            "dimension-sweep_report.md",
        } <= names

        plot = pd.read_csv(tmp_path / "dimension-sweep_recognition_vs_p.plot.tsv", sep="\t")
        assert list(plot.columns) == PLOT_COLUMNS
        assert set(plot["x"]) == {20, 40}
        assert len(json.loads((tmp_path / "dimension-sweep_fits.json").read_text())) == 10
        assert "| FittingStage |" in result["markdown_report"]

        sweep = pd.read_csv(tmp_path / "dimension-sweep_dimension_sweep.tsv", sep="\t")
        assert "bic" in sweep.columns
        assert sweep.loc[sweep["method"].str.startswith("HDDC"), "bic"].notna().all()
        bic_plot = pd.read_csv(tmp_path / "dimension-sweep_bic_vs_p.plot.tsv", sep="\t")
        assert len(bic_plot) == len(plot)

    def test_quick_hyper_params(self, tmp_path):
        result = run_benchmark("hyper-params", seed=1, replications=1, restarts=1, quick=True,
                               output_dir=str(tmp_path), jobs=1)
        assert result["status"] == "completed"
        per_k = result["tables"]["hyper_params_per_k"]
        assert sorted({row["k"] for row in per_k}) == [2, 3, 4]
        assert (tmp_path / "hyper-params_bic_vs_k.plot.tsv").is_file()

    def test_missing_crabs_file_reports_error(self, tmp_path, monkeypatch):
        monkeypatch.setattr(data_io, "CRABS_PATH", tmp_path / "absent.csv")
        result = run_benchmark("crabs", replications=1, restarts=1, quick=True, output_dir=str(tmp_path), jobs=1)
        assert result["status"] == "error"
        assert any("crabs data not found" in e for e in result["errors"])
        assert result["exit_code"] == 2
        assert result["fits"] == []

    def test_unknown_suite(self, tmp_path):
        with pytest.raises(InvalidInputError):
            run_benchmark("no-such-suite", output_dir=str(tmp_path))
