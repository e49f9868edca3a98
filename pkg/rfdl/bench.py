"""Train/test protocol and benchmark sweeps.

A benchmark expands its sweep into points, runs every (point, split) pair as an
independent job and aggregates the per-split results in sweep order.
"""
import logging
import os
import typing as t
from concurrent.futures import ThreadPoolExecutor
from concurrent.futures import as_completed
from dataclasses import replace

import numpy as np

from rfdl.classify import accuracy
from rfdl.classify import predict_batch
from rfdl.config import ExperimentConfig
from rfdl.config import HyperParams
from rfdl.data import Dataset
from rfdl.data import SplitPlan
from rfdl.data import corrupt_pixels
from rfdl.data import normalize_samples
from rfdl.data import occlude_block
from rfdl.data import pca_reduce
from rfdl.data import split_per_class
from rfdl.errors import ConfigError
from rfdl.errors import RfdlError
from rfdl.fs import ensure_dir
from rfdl.logging import progress_bar
from rfdl.logging import Stopwatch
from rfdl.model import Model
from rfdl.results import SplitResult
from rfdl.solver import ConvergenceTrace
from rfdl.solver import fit

logger = logging.getLogger(__name__)


class SweepPoint(t.NamedTuple):
    index: int
    value: t.Any
    params: HyperParams
    corruption: float = 0.0
    occlusion: int = 0

    @property
    def label(self) -> str:
        return "run" if self.value is None else str(self.value)


def _ablate(params: HyperParams, value: str) -> HyperParams:
    if value == "full":
        return params
    # alpha0 -> alpha = 0, and so on
    return replace(params, **{value[:-1]: 0.0})


def sweep_points(config: ExperimentConfig, params: HyperParams) -> t.List[SweepPoint]:
    """Expand the sweep of `config` into points; a config without a sweep has
    a single point labelled `run`."""
    kind = config.sweep.kind
    if kind is None:
        return [SweepPoint(0, None, params)]
    points = []
    for i, value in enumerate(config.sweep.values):
        if kind == "dict_size":
            point = SweepPoint(i, value, replace(params, dict_size=int(value)))
        elif kind == "corruption":
            point = SweepPoint(i, value, params, corruption=float(value))
        elif kind == "occlusion":
            point = SweepPoint(i, value, params, occlusion=int(value))
        elif kind == "ablation":
            point = SweepPoint(i, value, _ablate(params, value))
        else:
            point = SweepPoint(i, value, replace(params, **{kind: float(value)}))
        points.append(point._replace(params=point.params.validate()))
    return points


def degrade(
    dataset: Dataset,
    point: SweepPoint,
    seed: int,
    mode: str = "uniform",
) -> np.ndarray:
    """Corrupt or occlude the raw samples, then apply the dataset's normalization."""
    X = dataset.X
    if point.corruption:
        X = corrupt_pixels(X, point.corruption, seed, mode)
    if point.occlusion:
        X = occlude_block(X, point.occlusion, seed, dataset.geometry)
    return normalize_samples(X, dataset.normalize)


def plan_split(
    labels: np.ndarray,
    classes: int,
    train_per_class: t.Optional[int],
    seed: int,
) -> SplitPlan:
    """Per-class split, or every sample for training with no test set."""
    if train_per_class is None:
        return SplitPlan(np.arange(labels.size), np.array([], dtype=np.int64), 0, seed)
    return split_per_class(labels, train_per_class, seed, classes)


class TrainResult(t.NamedTuple):
    model: Model
    trace: ConvergenceTrace
    seconds: float


def train_split(
    method: str,
    X: np.ndarray,
    labels: np.ndarray,
    classes: int,
    train: np.ndarray,
    params: HyperParams,
    pca_energy: t.Optional[float] = None,
    progress: bool = True,
) -> TrainResult:
    """Fit `method` on the `train` columns, reducing them with PCA first if asked.

    The returned model carries the PCA basis, so it accepts raw samples."""
    X_train = X[:, train]
    with Stopwatch() as watch:
        pca = None
        if pca_energy is not None:
            X_train, pca = pca_reduce(X_train, pca_energy)
        model, trace = fit(method, X_train, params, labels[train], classes, progress)
    return TrainResult(model.with_pca(pca), trace, watch.elapsed)


class EvalResult(t.NamedTuple):
    accuracy: float
    predictions: np.ndarray
    seconds: float


def evaluate_split(
    model: Model, X: np.ndarray, labels: np.ndarray, indices: np.ndarray
) -> EvalResult:
    """Accuracy of `model` on the `indices` columns of the raw samples `X`."""
    with Stopwatch() as watch:
        _, hard = predict_batch(model, model.transform(X[:, indices]))
    return EvalResult(accuracy(hard, labels[indices]), hard, watch.elapsed)


class Job(t.NamedTuple):
    point: SweepPoint
    split: int


def run_job(
    job: Job,
    dataset: Dataset,
    config: ExperimentConfig,
    trace_dir: t.Optional[str] = None,
    progress: bool = False,
) -> SplitResult:
    """Degrade, split, train and test one (sweep point, split) pair.

    `dataset` holds the raw, unnormalized samples."""
    point, i = job
    split_seed = config.split.seed + i
    params = replace(point.params, seed=point.params.seed + i)
    X = degrade(dataset, point, split_seed, config.corruption_mode)
    plan = plan_split(dataset.labels, dataset.classes, config.split.train_per_class, split_seed)
    trained = train_split(
        config.method,
        X,
        dataset.labels,
        dataset.classes,
        plan.train,
        params,
        config.pca_energy,
        progress,
    )
    if trace_dir is not None:
        trained.trace.to_csv(os.path.join(trace_dir, f"{point.index}-{i}.csv"))
    tested = evaluate_split(trained.model, X, dataset.labels, plan.test)
    return SplitResult(
        sweep_value=point.value,
        split=i,
        accuracy=tested.accuracy,
        train_time_s=trained.seconds,
        test_time_s=tested.seconds,
        iterations=trained.trace.iterations,
        converged=trained.trace.converged,
        sweep_index=point.index,
    )


def _failed(job: Job, error: Exception) -> SplitResult:
    return SplitResult(
        sweep_value=job.point.value,
        split=job.split,
        accuracy=None,
        train_time_s=0.0,
        test_time_s=0.0,
        iterations=0,
        converged=False,
        error=f"{type(error).__name__}: {error}",
        sweep_index=job.point.index,
    )


def _guarded(job: Job, *args, **kwargs) -> SplitResult:
    try:
        return run_job(job, *args, **kwargs)
    except (RfdlError, np.linalg.LinAlgError) as e:
        logger.warning(f"Run {job.point.label}/{job.split} failed: {e}")
        return _failed(job, e)


def run_bench(
    config: ExperimentConfig,
    params: HyperParams,
    dataset: Dataset,
    out: str,
    jobs: int = 1,
) -> t.List[SplitResult]:
    """Run every (sweep point, split) job on a pool of `jobs` threads.

    Failed runs are recorded with their error and do not stop the bench.
    Results come back in completion order."""
    if config.split.train_per_class is None:
        raise ConfigError("A benchmark needs split.train_per_class to hold out a test set.")
    points = sweep_points(config, params)
    todo = [Job(point, i) for point in points for i in range(config.split.n_splits)]
    trace_dir = ensure_dir(os.path.join(out, "traces"))
    logger.info(f"Running {len(todo)} jobs on {jobs} worker(s).")

    results: t.List[SplitResult] = []
    with progress_bar(len(todo), "bench", unit="run") as bar:
        if jobs <= 1:
            for job in todo:
                results.append(_guarded(job, dataset, config, trace_dir))
                bar.update()
        else:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                futures = [
                    pool.submit(_guarded, job, dataset, config, trace_dir) for job in todo
                ]
                for future in as_completed(futures):
                    results.append(future.result())
                    bar.update()
    return results
