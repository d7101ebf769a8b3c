"""
Command-line flows and exit codes.
"""
import json

import pandas as pd
import pytest

import main as cli
import src.tools.data_io as data_io
from src.errors import DataReadError, FitFailedError, InvalidInputError, exit_code_for
from src.stages.simulation_stage import SimulationStage
from src.utils.reporting import SELECTION_COLUMNS

SPEC_TEXT = """
[global]
k = 2
p = 6
n = 300
seed = 4

[class 1]
proportion = 0.5
dim = 1
a = 60
b = 1

[class 2]
proportion = 0.5
dim = 2
a = 40, 30
b = 2
mean_radius = 8
"""


@pytest.fixture
def dataset(tmp_path):
    spec = tmp_path / "spec.ini"
    spec.write_text(SPEC_TEXT, encoding="utf-8")
    out = tmp_path / "data.csv"
    assert cli.main(["simulate", str(spec), "--out", str(out)]) == 0
    return out


def test_simulate_fit_predict(dataset, tmp_path):
    model_path = tmp_path / "model.json"
    code = cli.main([
        "fit", str(dataset), "--label-col", "last", "--k", "2",
        "--dim-policy", "fixed", "--dims", "1,2", "--out", str(model_path), "--restarts", "2",
    ])
    assert code == 0
    document = json.loads(model_path.read_text())
    assert document["k"] == 2 and document["p"] == 6

    predictions = tmp_path / "pred.csv"
    assert cli.main(["predict", str(model_path), str(dataset), "--label-col", "last", "--out", str(predictions)]) == 0
    frame = pd.read_csv(predictions)
    assert len(frame) == 300
    assert list(frame.columns) == ["assignment", "t0", "t1"]
    assert ((frame["t0"] + frame["t1"] - 1.0).abs() < 1e-9).all()


def test_fit_prints_summary(dataset, capsys):
    assert cli.main(["fit", str(dataset), "--label-col", "last", "--k", "2", "--restarts", "1"]) == 0
    fields = capsys.readouterr().out.strip().splitlines()[-1].split("\t")
    assert fields[0] == cli.DEFAULT_MODEL
    assert fields[1] == "2"


def test_confusion_table(dataset, tmp_path):
    table = tmp_path / "confusion.tsv"
    assert cli.main(["fit", str(dataset), "--label-col", "last", "--k", "2", "--confusion", str(table)]) == 0
    frame = pd.read_csv(table, sep="\t")
    assert frame.columns[0] == "true"
    assert frame.drop(columns="true").to_numpy().sum() == 300


def test_single_component_converges_immediately(dataset, tmp_path):
    model_path = tmp_path / "one.json"
    assert cli.main(["fit", str(dataset), "--label-col", "last", "--k", "1", "--out", str(model_path)]) == 0
    assert json.loads(model_path.read_text())["fit"]["n_iters"] <= 2


def test_equal_seeds_write_identical_models(dataset, tmp_path):
    paths = [tmp_path / "first.json", tmp_path / "second.json"]
    for path in paths:
        assert cli.main(["fit", str(dataset), "--label-col", "last", "--k", "2", "--seed", "9", "--out", str(path)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_select_writes_table(dataset, tmp_path):
    table = tmp_path / "select.tsv"
    code = cli.main([
        "select", str(dataset), "--label-col", "last", "--k-range", "1..3",
        "--thresholds", "0.1,0.2", "--restarts", "1", "--jobs", "1", "--out", str(table),
    ])
    assert code == 0
    frame = pd.read_csv(table, sep="\t")
    assert list(frame.columns) == SELECTION_COLUMNS
    assert len(frame) == 6


def test_parse_k_range():
    assert cli.parse_k_range("2..6") == (2, 6)
    assert cli.parse_k_range("1-4") == (1, 4)
    assert cli.parse_k_range("3") == (3, 3)


class TestExitCodes:

    def test_missing_input_file(self, tmp_path):
        assert cli.main(["fit", str(tmp_path / "absent.csv"), "--k", "2"]) == 2

    def test_unknown_model(self, dataset):
        assert cli.main(["fit", str(dataset), "--label-col", "last", "--k", "2", "--model", "[a b c d]"]) == 3

    def test_too_many_components(self, dataset):
        assert cli.main(["fit", str(dataset), "--label-col", "last", "--k", "301"]) == 3

    def test_fixed_policy_needs_dims(self, dataset):
        assert cli.main(["fit", str(dataset), "--label-col", "last", "--k", "2", "--dim-policy", "fixed"]) == 3

    def test_malformed_csv(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2\n3,oops\n", encoding="utf-8")
        assert cli.main(["fit", str(path), "--k", "1"]) == 3

    def test_fit_failure(self, dataset, monkeypatch):
        def failing_fit(*args, **kwargs):
            raise FitFailedError("all restarts degenerate")

        monkeypatch.setattr(cli, "fit", failing_fit)
        assert cli.main(["fit", str(dataset), "--label-col", "last", "--k", "2"]) == 4

    def test_predict_dimension_mismatch(self, dataset, tmp_path):
        model_path = tmp_path / "model.json"
        assert cli.main(["fit", str(dataset), "--label-col", "last", "--k", "2", "--out", str(model_path)]) == 0
        narrow = tmp_path / "narrow.csv"
        narrow.write_text("1,2,3\n4,5,6\n", encoding="utf-8")
        assert cli.main(["predict", str(model_path), str(narrow), "--out", str(tmp_path / "p.csv")]) == 3

    def test_invalid_em_settings(self, dataset):
        assert cli.main(["fit", str(dataset), "--label-col", "last", "--k", "2", "--restarts", "0"]) == 3

    def test_unknown_suite(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["benchmark", "no-such-suite"])
        assert info.value.code == 2

    def test_benchmark_missing_dataset(self, tmp_path, monkeypatch):
        monkeypatch.setattr(data_io, "CRABS_PATH", tmp_path / "absent.csv")
        code = cli.main(["benchmark", "crabs", "--quick", "--restarts", "1", "--jobs", "1", "--out", str(tmp_path)])
        assert code == 2

    def test_benchmark_stage_failure_keeps_error_class(self, tmp_path, monkeypatch):
        def broken_plan(self, state):
            raise InvalidInputError("condition number must be >= 1")

        monkeypatch.setattr(SimulationStage, "_plan_full_rank", broken_plan)
        code = cli.main(["benchmark", "full-rank", "--quick", "--restarts", "1", "--jobs", "1", "--out", str(tmp_path)])
        assert code == 3


def test_exit_code_for():
    assert exit_code_for(DataReadError("gone")) == 2
    assert exit_code_for(InvalidInputError("bad")) == 3
    assert exit_code_for(FitFailedError("degenerate")) == 4
    assert exit_code_for(RuntimeError("unexpected")) == 4
