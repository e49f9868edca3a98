import csv
import json

import pytest

from rfdl import results
from rfdl.results import SplitResult


def _result(index, split, accuracy, value=None, error=None):
    return SplitResult(
        sweep_value=value if value is not None else index * 10,
        split=split,
        accuracy=accuracy,
        train_time_s=1.0,
        test_time_s=0.5,
        iterations=20,
        converged=True,
        error=error,
        sweep_index=index,
    )


def test_aggregate_restores_sweep_order():
    shuffled = [
        _result(1, 1, 0.8),
        _result(0, 1, 0.9),
        _result(1, 0, 0.6),
        _result(0, 0, 0.7),
    ]
    records = results.aggregate(shuffled)
    assert [r.sweep_value for r in records] == [0, 10]
    assert [s.split for s in records[0].splits] == [0, 1]
    assert records[1].accuracies == [0.6, 0.8]


def test_record_statistics():
    (record,) = results.aggregate([_result(0, i, a) for i, a in enumerate([0.9, 0.95, 1.0])])
    assert record.mean == pytest.approx(0.95)
    # population, not sample, standard deviation
    assert record.std == pytest.approx((0.05**2 * 2 / 3) ** 0.5)
    assert record.best == 1.0


def test_record_skips_failures():
    (record,) = results.aggregate(
        [_result(0, 0, 0.5), _result(0, 1, None, error="DivergenceError: boom")]
    )
    assert record.accuracies == [0.5]
    summary = record.to_dict()
    assert summary["failed"] == 1
    assert summary["splits"] == 2
    assert summary["accuracies"] == [0.5, None]
    assert summary["mean_iterations"] == 20


def test_record_all_failed():
    (record,) = results.aggregate([_result(0, 0, None, error="x")])
    assert record.mean is record.std is record.best is None


def test_write_results(tmp_path):
    records = results.aggregate([_result(0, 0, 0.5), _result(1, 0, 0.75)])
    results.write_results(str(tmp_path), records, {"method": "jrfdl"})
    with open(tmp_path / "results.json") as file:
        data = json.load(file)
    assert data["method"] == "jrfdl"
    assert [r["mean"] for r in data["results"]] == [0.5, 0.75]
    with open(tmp_path / "results.csv") as file:
        rows = list(csv.reader(file))
    assert tuple(rows[0]) == results.SUMMARY_COLUMNS
    assert rows[1][:4] == ["0", "0.5", "0.0", "0.5"]


def test_write_sweep(tmp_path):
    path = str(tmp_path / "sweep.csv")
    results.write_sweep(path, [_result(1, 0, 0.5), _result(0, 0, None, error="x")])
    with open(path) as file:
        rows = list(csv.DictReader(file))
    assert [row["sweep_value"] for row in rows] == ["0", "10"]
    assert rows[0]["accuracy"] == "" and rows[0]["error"] == "x"
    assert rows[1]["converged"] == "true"


def test_metadata_record():
    record = results.metadata_record("train", seed=3)
    assert record["command"] == "train"
    assert record["seed"] == 3
    assert {"version", "python", "numpy"} <= record.keys()
