"""Long running reproductions on the synthetic three class suite.

Skipped unless pytest is given --run-acceptance."""
from dataclasses import replace

import numpy as np
import pytest

from rfdl import solver
from rfdl.bench import run_bench
from rfdl.config import METHOD_DEFAULTS
from rfdl.config import ExperimentConfig
from rfdl.config import SplitSpec
from rfdl.config import SweepSpec
from rfdl.data import Dataset
from rfdl.data import normalize_samples
from rfdl.data import synth_classes
from rfdl.results import aggregate

pytestmark = pytest.mark.acceptance

SPLITS = 10


@pytest.fixture(scope="module")
def suite():
    X, labels = synth_classes(3, 30, 30, separation=5.0, noise_sigma=0.5, seed=0)
    return Dataset(normalize_samples(X, "unit_l2"), labels, 3, normalize="unit_l2")


def _bench(tmp_path, dataset, method, kind=None, values=(), **params):
    config = ExperimentConfig(
        dataset="synthetic",
        method=method,
        split=SplitSpec(train_per_class=10, n_splits=SPLITS),
        sweep=SweepSpec(kind, list(values)),
    )
    params = replace(METHOD_DEFAULTS[method], max_iter=200, **params)
    results = run_bench(config, params, dataset, str(tmp_path), jobs=4)
    assert all(r.ok for r in results), [r.error for r in results if not r.ok]
    return aggregate(results)


@pytest.mark.parametrize("method", ["jrfdl", "djrfdl"])
def test_convergence(suite, method):
    converged = 0
    for seed in range(10):
        params = replace(METHOD_DEFAULTS[method], max_iter=200, eps=1e-5, seed=seed)
        model, trace = solver.fit(method, suite.X, params, suite.labels, progress=False)
        if trace.converged:
            converged += 1
            assert trace.rows[0].res_max / trace.final_residual >= 1e3
    assert converged >= 9


def test_djrfdl_accuracy(tmp_path, suite):
    (record,) = _bench(tmp_path, suite, "djrfdl")
    assert record.mean >= 0.95


def test_jrfdl_posthoc_accuracy(tmp_path, suite):
    (record,) = _bench(tmp_path, suite, "jrfdl")
    assert record.mean >= 0.90


def test_ablation_ordering(tmp_path, suite):
    records = _bench(
        tmp_path, suite, "djrfdl", "ablation", ["full", "alpha0", "beta0", "gamma0"]
    )
    means = {record.sweep_value: record.mean for record in records}
    assert all(means["full"] >= means[v] for v in ("alpha0", "beta0", "gamma0"))
    assert means["alpha0"] == min(means.values())


def test_corruption_degrades_gracefully(tmp_path, suite):
    records = _bench(tmp_path, suite, "djrfdl", "corruption", [0.0, 0.2, 0.4, 0.6])
    for cleaner, noisier in zip(records, records[1:]):
        assert noisier.mean <= cleaner.mean + max(cleaner.std, noisier.std)
    assert np.isfinite([r.mean for r in records]).all()
