"""Per-split result records, their aggregates and the files they are written to."""
import csv
import json
import logging
import math
import os
import platform
import sys
import typing as t
from dataclasses import dataclass
from dataclasses import field

import numpy as np

from rfdl.fs import atomic_write

logger = logging.getLogger(__name__)


def software_version() -> str:
    if sys.version_info >= (3, 8):
        from importlib.metadata import PackageNotFoundError
        from importlib.metadata import version

        try:
            return version("rfdl")
        except PackageNotFoundError:
            pass
    return "unknown"


class SplitResult(t.NamedTuple):
    sweep_value: t.Any
    split: int
    accuracy: t.Optional[float]
    train_time_s: float
    test_time_s: float
    iterations: int
    converged: bool
    error: t.Optional[str] = None
    sweep_index: int = 0

    @property
    def ok(self) -> bool:
        return self.error is None and self.accuracy is not None


@dataclass
class ResultRecord:
    """All splits of one sweep point."""

    sweep_value: t.Any
    splits: t.List[SplitResult] = field(default_factory=list)

    @property
    def accuracies(self) -> t.List[float]:
        return [s.accuracy for s in self.splits if s.ok]  # type: ignore

    @property
    def mean(self) -> t.Optional[float]:
        return float(np.mean(self.accuracies)) if self.accuracies else None

    @property
    def std(self) -> t.Optional[float]:
        """Population standard deviation of the split accuracies."""
        return float(np.std(self.accuracies)) if self.accuracies else None

    @property
    def best(self) -> t.Optional[float]:
        return max(self.accuracies) if self.accuracies else None

    def _mean_of(self, attr: str) -> t.Optional[float]:
        values = [getattr(s, attr) for s in self.splits if s.ok]
        return float(np.mean(values)) if values else None

    def to_dict(self) -> t.Dict[str, t.Any]:
        return {
            "sweep_value": self.sweep_value,
            "mean": self.mean,
            "std": self.std,
            "best": self.best,
            "mean_train_time_s": self._mean_of("train_time_s"),
            "mean_test_time_s": self._mean_of("test_time_s"),
            "mean_iterations": self._mean_of("iterations"),
            "splits": len(self.splits),
            "failed": sum(1 for s in self.splits if not s.ok),
            "accuracies": [s.accuracy for s in self.splits],
        }


def aggregate(results: t.Iterable[SplitResult]) -> t.List[ResultRecord]:
    """Group results by sweep point; points keep their sweep order and splits
    are sorted by index, whatever order the results arrived in."""
    ordered = sorted(results, key=lambda r: (r.sweep_index, r.split))
    records: t.List[ResultRecord] = []
    for result in ordered:
        if not records or records[-1].splits[0].sweep_index != result.sweep_index:
            records.append(ResultRecord(result.sweep_value))
        records[-1].splits.append(result)
    return records


def _json_default(value: t.Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def write_json(path: str, data: t.Any) -> None:
    with atomic_write(path) as file:
        json.dump(data, file, indent=2, sort_keys=True, default=_json_default)
        file.write("\n")


def _cell(value: t.Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else repr(float(value))
    return str(value)


def write_csv(path: str, header: t.Sequence[str], rows: t.Iterable[t.Sequence[t.Any]]) -> None:
    with atomic_write(path) as file:
        writer = csv.writer(file, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(_cell(value) for value in row)


SUMMARY_COLUMNS = (
    "sweep_value",
    "mean",
    "std",
    "best",
    "mean_train_time_s",
    "mean_test_time_s",
    "splits",
    "failed",
)
SWEEP_COLUMNS = (
    "sweep_value",
    "split",
    "accuracy",
    "train_time_s",
    "test_time_s",
    "iterations",
    "converged",
    "error",
)


def write_results(directory: str, records: t.Sequence[ResultRecord], extra: t.Dict[str, t.Any]) -> None:
    """Write `results.json` and the per-point summary `results.csv`."""
    summaries = [record.to_dict() for record in records]
    write_json(os.path.join(directory, "results.json"), {**extra, "results": summaries})
    write_csv(
        os.path.join(directory, "results.csv"),
        SUMMARY_COLUMNS,
        ([summary[column] for column in SUMMARY_COLUMNS] for summary in summaries),
    )


def write_sweep(path: str, results: t.Iterable[SplitResult]) -> None:
    """Tidy per-split table, one row per (sweep value, split)."""
    write_csv(
        path,
        SWEEP_COLUMNS,
        (
            [getattr(result, column) for column in SWEEP_COLUMNS]
            for result in sorted(results, key=lambda r: (r.sweep_index, r.split))
        ),
    )


def metadata_record(command: str, **fields: t.Any) -> t.Dict[str, t.Any]:
    return {
        "command": command,
        "version": software_version(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        **fields,
    }
