import json
import os

import numpy as np
import pytest

from rfdl import data
from rfdl.errors import DataError
from rfdl.errors import DimensionMismatchError
from rfdl.errors import EmptyMatrixError
from rfdl.errors import InsufficientSamplesError
from rfdl.errors import InvalidParameterError
from rfdl.errors import LabelDomainError
from rfdl.errors import MatrixFormatError


@pytest.mark.parametrize("format", ["rawf64", "csv"])
def test_matrix_roundtrip(tmp_path, rng, format):
    M = rng.standard_normal((3, 5))
    path = os.path.join(tmp_path, "m" + data.MATRIX_EXTENSIONS[format])
    data.save_matrix(path, M)
    np.testing.assert_array_equal(data.load_matrix(path), M)


def test_rawf64_layout(tmp_path):
    path = os.path.join(tmp_path, "m.bin")
    data.save_matrix(path, np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]))
    with open(path, "rb") as file:
        raw = file.read()
    assert raw[:4] == b"HYBM"
    assert raw[4:12] == (3).to_bytes(4, "little") + (2).to_bytes(4, "little")
    np.testing.assert_array_equal(
        np.frombuffer(raw[12:], dtype="<f8"), [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]
    )


@pytest.mark.parametrize(
    "contents, error",
    [
        (b"", EmptyMatrixError),
        (b"HYB", MatrixFormatError),
        (b"NOPE\x01\x00\x00\x00\x01\x00\x00\x00" + bytes(8), MatrixFormatError),
        (b"HYBM\x00\x00\x00\x00\x01\x00\x00\x00", EmptyMatrixError),
        (b"HYBM\x02\x00\x00\x00\x02\x00\x00\x00" + bytes(24), MatrixFormatError),
    ],
    ids=["empty", "short header", "bad magic", "zero rows", "truncated"],
)
def test_rawf64_errors(tmp_path, contents, error):
    path = os.path.join(tmp_path, "m.bin")
    with open(path, "wb") as file:
        file.write(contents)
    with pytest.raises(error):
        data.load_matrix(path)


def test_csv_header_is_skipped(tmp_path):
    path = os.path.join(tmp_path, "m.csv")
    with open(path, "w") as file:
        file.write("a,b\n1,2\n3,4\n")
    np.testing.assert_array_equal(data.load_matrix(path), [[1, 2], [3, 4]])


@pytest.mark.parametrize(
    "contents, message",
    [
        ("1,2\n3\n", "line 2: expected 2 values, found 1"),
        ("1,2\nx,4\n", "line 2: non-numeric"),
        ("1,nan\n", "non-finite"),
    ],
)
def test_csv_errors(tmp_path, contents, message):
    path = os.path.join(tmp_path, "m.csv")
    with open(path, "w") as file:
        file.write(contents)
    with pytest.raises(MatrixFormatError, match=message):
        data.load_matrix(path)


def test_csv_empty(tmp_path):
    path = os.path.join(tmp_path, "m.csv")
    with open(path, "w") as file:
        file.write("\n")
    with pytest.raises(EmptyMatrixError):
        data.load_matrix(path)


def test_missing_matrix(tmp_path):
    with pytest.raises(DataError, match="does not exist"):
        data.load_matrix(os.path.join(tmp_path, "missing.bin"))


def test_labels_roundtrip(tmp_path):
    path = os.path.join(tmp_path, "labels.txt")
    data.save_labels(path, np.array([0, 2, 1]))
    np.testing.assert_array_equal(data.load_labels(path), [0, 2, 1])
    with open(path, "a") as file:
        file.write("one\n")
    with pytest.raises(DataError, match="line 4"):
        data.load_labels(path)


def _write(tmp_path, X, labels, **manifest):
    data.save_matrix(os.path.join(tmp_path, "X.bin"), X)
    data.save_labels(os.path.join(tmp_path, "labels.txt"), labels)
    path = os.path.join(tmp_path, "dataset.json")
    with open(path, "w") as file:
        json.dump({"features": "X.bin", "labels": "labels.txt", **manifest}, file)
    return path


def test_load_dataset(tmp_path, synthetic):
    X, labels = synthetic
    path = _write(tmp_path, X, labels, classes=3, height=3, width=4)
    dataset = data.load_dataset(path)
    np.testing.assert_array_equal(dataset.X, X)
    np.testing.assert_array_equal(dataset.labels, labels)
    assert dataset.classes == 3
    assert dataset.geometry == (3, 4)
    assert (dataset.n, dataset.N) == X.shape
    assert dataset.hash() == data.load_dataset(path).hash()


def test_load_dataset_normalizes(tmp_path, synthetic):
    X, labels = synthetic
    path = _write(tmp_path, X, labels, classes=3, normalize="unit_l2")
    np.testing.assert_allclose(
        np.linalg.norm(data.load_dataset(path).X, axis=0), 1.0
    )
    np.testing.assert_array_equal(data.load_dataset(path, normalize=False).X, X)


@pytest.mark.parametrize(
    "manifest, labels, error",
    [
        ({"classes": 2}, None, LabelDomainError),
        ({"classes": 3, "height": 5, "width": 5}, None, DimensionMismatchError),
        ({"classes": 3, "height": 3}, None, DataError),
        ({"classes": 3, "normalize": "zscore"}, None, DataError),
        ({"classes": 3}, np.zeros(29, dtype=int), DimensionMismatchError),
        ({"classes": "three"}, None, DataError),
    ],
    ids=["label domain", "geometry", "half geometry", "normalization", "label count", "type"],
)
def test_load_dataset_errors(tmp_path, synthetic, manifest, labels, error):
    X, default_labels = synthetic
    path = _write(tmp_path, X, default_labels if labels is None else labels, **manifest)
    with pytest.raises(error):
        data.load_dataset(path)


def test_write_dataset(tmp_path, synthetic):
    X, labels = synthetic
    path = data.write_dataset(str(tmp_path), X, labels, 3, "csv", (3, 4))
    assert os.path.basename(path) == "dataset.json"
    dataset = data.load_dataset(path)
    np.testing.assert_array_equal(dataset.X, X)
    assert dataset.geometry == (3, 4)


@pytest.mark.parametrize("seed", range(10))
def test_split_per_class(seed):
    labels = np.repeat(np.arange(4), 7)
    plan = data.split_per_class(labels, 3, seed)
    assert plan.train.size == 12 and plan.test.size == 16
    assert np.all(np.bincount(labels[plan.train]) == 3)
    assert not set(plan.train) & set(plan.test)
    assert sorted([*plan.train, *plan.test]) == list(range(labels.size))
    np.testing.assert_array_equal(plan.train, np.sort(plan.train))
    np.testing.assert_array_equal(plan.train, data.split_per_class(labels, 3, seed).train)


def test_split_per_class_errors():
    labels = np.array([0, 0, 1])
    with pytest.raises(InsufficientSamplesError, match="Class 1"):
        data.split_per_class(labels, 2, 0)
    with pytest.raises(InvalidParameterError):
        data.split_per_class(labels, 0, 0)


def test_normalize_samples_keeps_zero_columns():
    X = np.array([[3.0, 0.0], [4.0, 0.0]])
    np.testing.assert_allclose(data.normalize_samples(X, "unit_l2"), [[0.6, 0.0], [0.8, 0.0]])


def test_pca(rng):
    # rank two data embedded in five dimensions
    X = rng.standard_normal((5, 2)) @ rng.standard_normal((2, 40)) + 3.0
    Z, basis = data.pca_reduce(X, 0.999)
    assert basis.dim == 2 and Z.shape == (2, 40)
    np.testing.assert_allclose(basis.basis.T @ basis.basis, np.eye(2), atol=1e-12)
    np.testing.assert_allclose(data.invert_pca(Z, basis), X, atol=1e-10)
    np.testing.assert_allclose(data.apply_pca(X, basis), Z)
    assert data.pca_reduce(X, 1.0)[1].dim == 5
    with pytest.raises(InvalidParameterError):
        data.pca_reduce(X, 0.0)


@pytest.mark.parametrize(
    "fraction, n, expected", [(0.0, 10, 0), (0.29, 100, 29), (0.5, 7, 3), (1.0, 9, 9)]
)
def test_corrupted_count(fraction, n, expected):
    assert data.corrupted_count(fraction, n) == expected


@pytest.mark.parametrize("mode", data.CORRUPTION_MODES)
def test_corrupt_pixels(rng, mode):
    X = rng.uniform(size=(20, 6))
    Y = data.corrupt_pixels(X, 0.3, seed=5, mode=mode)
    changed = (Y != X).sum(axis=0)
    assert np.all(changed <= 6)
    assert Y.min() >= X.min() and Y.max() <= X.max()
    np.testing.assert_array_equal(Y, data.corrupt_pixels(X, 0.3, seed=5, mode=mode))
    assert not np.array_equal(Y, data.corrupt_pixels(X, 0.3, seed=6, mode=mode))
    np.testing.assert_array_equal(data.corrupt_pixels(X, 0.0, seed=5), X)


def test_corrupt_pixels_rejects(rng):
    X = rng.uniform(size=(4, 2))
    with pytest.raises(InvalidParameterError):
        data.corrupt_pixels(X, 1.5, 0)
    with pytest.raises(InvalidParameterError):
        data.corrupt_pixels(X, 0.5, 0, mode="speckle")


def test_occlude_block(rng):
    X = rng.uniform(0.1, 1.0, size=(12, 5))
    Y = data.occlude_block(X, 2, seed=3, geometry=(3, 4))
    assert np.all((Y == 0).sum(axis=0) == 4)
    for j in range(5):
        rows, cols = np.nonzero(Y[:, j].reshape(3, 4) == 0)
        assert rows.max() - rows.min() == 1 and cols.max() - cols.min() == 1
    np.testing.assert_array_equal(data.occlude_block(X, 0, 3, (3, 4)), X)


def test_occlude_block_errors(rng):
    X = rng.uniform(size=(12, 2))
    with pytest.raises(DataError):
        data.occlude_block(X, 2, 0, None)
    with pytest.raises(InvalidParameterError):
        data.occlude_block(X, 4, 0, (3, 4))
    with pytest.raises(DimensionMismatchError):
        data.occlude_block(X, 1, 0, (2, 2))


def test_synth_classes():
    X, labels = data.synth_classes(3, 5, 4, separation=2.0, noise_sigma=0.0, seed=0)
    assert X.shape == (5, 12)
    np.testing.assert_array_equal(np.bincount(labels), [4, 4, 4])
    # without noise every class collapses to its mean
    for c in range(3):
        members = X[:, labels == c]
        np.testing.assert_array_equal(members, members[:, :1].repeat(4, axis=1))
    means = [X[:, labels == c][:, 0] for c in range(3)]
    assert np.linalg.norm(means[0] - means[1]) == pytest.approx(2.0)
    assert np.all(X >= 0)
    Y, _ = data.synth_classes(3, 5, 4, separation=2.0, noise_sigma=0.0, seed=0)
    np.testing.assert_array_equal(X, Y)


def test_synth_classes_separable():
    X, labels = data.synth_classes(3, 30, 30, separation=5.0, noise_sigma=0.5, seed=1)
    centroids = np.stack([X[:, labels == c].mean(axis=1) for c in range(3)], axis=1)
    distances = np.linalg.norm(X[:, :, np.newaxis] - centroids[:, np.newaxis, :], axis=0)
    assert np.mean(np.argmin(distances, axis=1) == labels) >= 0.99


def test_synth_classes_rejects():
    with pytest.raises(InvalidParameterError):
        data.synth_classes(4, 3, 2, 1.0, 0.1, 0)
    with pytest.raises(InvalidParameterError):
        data.synth_classes(2, 3, 2, -1.0, 0.1, 0)
