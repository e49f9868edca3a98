"""Dataset input/output, splits, preprocessing and the robustness protocols.

Sample matrices are n x N with one sample per column. Image samples store
their pixels row-major, so pixel (i, j) of an h x w image is row i * w + j.
"""
import csv
import json
import logging
import math
import os
import struct
import typing as t
from dataclasses import asdict
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from rfdl.config import DOCUMENT_ERRORS
from rfdl.config import dataclass_fromdict
from rfdl.config import load_document
from rfdl.errors import DataError
from rfdl.errors import DimensionMismatchError
from rfdl.errors import EmptyMatrixError
from rfdl.errors import ExceptionCount
from rfdl.errors import InsufficientSamplesError
from rfdl.errors import InvalidParameterError
from rfdl.errors import LabelDomainError
from rfdl.errors import MatrixFormatError
from rfdl.fs import atomic_write
from rfdl.fs import hash_arrays
from rfdl.fs import resolve_relative

logger = logging.getLogger(__name__)

RAWF64_MAGIC = b"HYBM"
RAWF64_HEADER = struct.Struct("<4sII")
U32_MAX = 2**32 - 1

MATRIX_EXTENSIONS = {"rawf64": ".bin", "csv": ".csv"}
NORMALIZATIONS = ("none", "unit_l2")
CORRUPTION_MODES = ("uniform", "salt_pepper")


def infer_format(path: str) -> str:
    return "csv" if path.lower().endswith(".csv") else "rawf64"


def load_matrix(path: str, format: t.Optional[str] = None) -> np.ndarray:
    """Read a CSV or RAWF64 matrix. The format is inferred from the extension
    unless given."""
    format = format or infer_format(path)
    try:
        if format == "csv":
            M = _load_csv(path)
        elif format == "rawf64":
            M = _load_rawf64(path)
        else:
            raise MatrixFormatError(f"Unknown matrix format '{format}'.")
    except FileNotFoundError:
        raise DataError(f"Matrix file '{path}' does not exist.")
    if not np.all(np.isfinite(M)):
        raise MatrixFormatError(f"Matrix file '{path}' contains non-finite values.")
    logger.debug(f"Loaded {M.shape[0]}x{M.shape[1]} matrix from '{path}'.")
    return M


def _load_rawf64(path: str) -> np.ndarray:
    with open(path, "rb") as file:
        data = file.read()
    if not data:
        raise EmptyMatrixError(path)
    if len(data) < RAWF64_HEADER.size:
        raise MatrixFormatError(f"'{path}': truncated RAWF64 header.")
    magic, rows, cols = RAWF64_HEADER.unpack_from(data)
    if magic != RAWF64_MAGIC:
        raise MatrixFormatError(f"'{path}' is not a RAWF64 matrix (bad magic {magic!r}).")
    if rows == 0 or cols == 0:
        raise EmptyMatrixError(path)
    payload = len(data) - RAWF64_HEADER.size
    if payload != rows * cols * 8:
        raise MatrixFormatError(
            f"'{path}': header declares {rows}x{cols} entries "
            + f"({rows * cols * 8} bytes) but the file holds {payload} bytes."
        )
    return (
        np.frombuffer(data, dtype="<f8", offset=RAWF64_HEADER.size)
        .reshape(rows, cols)
        .astype(np.float64)
    )


def _parse_row(row: t.List[str]) -> t.List[float]:
    return [float(value) for value in row]


def _load_csv(path: str) -> np.ndarray:
    rows: t.List[t.List[float]] = []
    width = None
    with open(path, newline="") as file:
        for line, row in enumerate(csv.reader(file), start=1):
            if not row or all(not value.strip() for value in row):
                continue
            try:
                values = _parse_row(row)
            except ValueError:
                if width is None and not rows and line == 1:
                    continue  # header
                raise MatrixFormatError(f"'{path}', line {line}: non-numeric value.")
            if width is None:
                width = len(values)
            elif len(values) != width:
                raise MatrixFormatError(
                    f"'{path}', line {line}: expected {width} values, found {len(values)}."
                )
            rows.append(values)
    if not rows:
        raise EmptyMatrixError(path)
    return np.array(rows, dtype=np.float64)


def save_matrix(path: str, M: np.ndarray, format: t.Optional[str] = None) -> None:
    format = format or infer_format(path)
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    if format == "rawf64":
        rows, cols = M.shape
        if rows > U32_MAX or cols > U32_MAX:
            raise MatrixFormatError(f"A {rows}x{cols} matrix does not fit RAWF64.")
        with atomic_write(path, "wb") as file:
            file.write(RAWF64_HEADER.pack(RAWF64_MAGIC, rows, cols))
            file.write(M.astype("<f8").tobytes(order="C"))
    elif format == "csv":
        with atomic_write(path) as file:
            np.savetxt(file, M, delimiter=",", fmt="%.17g")
    else:
        raise MatrixFormatError(f"Unknown matrix format '{format}'.")


def load_labels(path: str) -> np.ndarray:
    labels: t.List[int] = []
    try:
        with open(path) as file:
            for line, text in enumerate(file, start=1):
                text = text.strip()
                if not text:
                    continue
                try:
                    labels.append(int(text))
                except ValueError:
                    raise DataError(f"'{path}', line {line}: '{text}' is not an integer label.")
    except FileNotFoundError:
        raise DataError(f"Labels file '{path}' does not exist.")
    if not labels:
        raise DataError(f"Labels file '{path}' is empty.")
    return np.array(labels, dtype=np.int64)


def save_labels(path: str, labels: np.ndarray) -> None:
    with atomic_write(path) as file:
        file.writelines(f"{int(label)}\n" for label in labels)


@dataclass(frozen=True)
class DatasetManifest:
    features: str
    """Path to the n x N feature matrix."""

    labels: str
    """Path to the labels file, one 0-based class index per line."""

    classes: int
    """Number of classes c."""

    height: t.Optional[int] = None
    width: t.Optional[int] = None

    normalize: str = "none"
    """'none' or 'unit_l2' (scale every sample to unit Euclidean norm)."""

    def validate(self) -> "DatasetManifest":
        if self.classes < 1:
            raise DataError("Manifest 'classes' must be at least 1.")
        if self.normalize not in NORMALIZATIONS:
            raise DataError(f"Unknown normalization '{self.normalize}'.")
        if (self.height is None) != (self.width is None):
            raise DataError("Manifest must give both 'height' and 'width' or neither.")
        if self.height is not None and (self.height < 1 or self.width < 1):  # type: ignore
            raise DataError("Manifest image geometry must be positive.")
        return self


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    labels: np.ndarray
    classes: int
    geometry: t.Optional[t.Tuple[int, int]] = None
    normalize: str = "none"

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def N(self) -> int:
        return self.X.shape[1]

    def hash(self) -> str:
        return hash_arrays(self.X, self.labels)


def load_manifest(path: str) -> DatasetManifest:
    try:
        with open(path) as file:
            data = load_document(file, path)
    except FileNotFoundError:
        raise DataError(f"Manifest '{path}' does not exist.")
    except DOCUMENT_ERRORS as e:
        raise DataError(f"Manifest '{path}' could not be parsed: {e}")
    if not isinstance(data, dict):
        raise DataError(f"Manifest '{path}' is not a JSON object.")
    try:
        manifest = dataclass_fromdict(data, DatasetManifest)
    except ExceptionCount as e:
        raise DataError(f"{e.count} error(s) were encountered in manifest '{path}'.")
    return manifest.validate()


def write_manifest(path: str, manifest: DatasetManifest) -> None:
    with atomic_write(path) as file:
        json.dump(asdict(manifest), file, indent=2, sort_keys=True)
        file.write("\n")


def load_dataset(path: str, normalize: bool = True) -> Dataset:
    """Load the dataset described by the manifest at `path`.

    Feature and label paths are resolved relative to the manifest. The
    manifest's normalization is applied unless `normalize` is false."""
    manifest = load_manifest(path)
    X = load_matrix(resolve_relative(path, manifest.features))
    labels = load_labels(resolve_relative(path, manifest.labels))
    if labels.size != X.shape[1]:
        raise DimensionMismatchError("label count", X.shape[1], labels.size)
    check_labels(labels, manifest.classes)
    geometry = None
    if manifest.height is not None and manifest.width is not None:
        geometry = (manifest.height, manifest.width)
        if manifest.height * manifest.width != X.shape[0]:
            raise DimensionMismatchError(
                "image height x width", X.shape[0], manifest.height * manifest.width
            )
    if normalize:
        X = normalize_samples(X, manifest.normalize)
    return Dataset(X, labels, manifest.classes, geometry, manifest.normalize)


def check_labels(labels: np.ndarray, classes: int) -> None:
    bad = np.flatnonzero((labels < 0) | (labels >= classes))
    if bad.size:
        raise LabelDomainError(
            f"Label {int(labels[bad[0]])} of sample {int(bad[0])} is outside [0, {classes})."
        )


def normalize_samples(X: np.ndarray, mode: str) -> np.ndarray:
    if mode == "none":
        return X
    if mode == "unit_l2":
        norms = np.linalg.norm(X, axis=0)
        norms[norms == 0] = 1.0
        return X / norms
    raise DataError(f"Unknown normalization '{mode}'.")


class SplitPlan(t.NamedTuple):
    train: np.ndarray
    test: np.ndarray
    per_class: int
    seed: int


def split_per_class(
    labels: np.ndarray, f: int, seed: int, classes: t.Optional[int] = None
) -> SplitPlan:
    """Draw `f` training samples uniformly at random from every class; the rest
    form the test set. Index lists are sorted."""
    if f < 1:
        raise InvalidParameterError("Training samples per class must be at least 1.")
    classes = classes if classes is not None else int(labels.max()) + 1
    rng = np.random.default_rng(seed)
    train: t.List[np.ndarray] = []
    for label in range(classes):
        members = np.flatnonzero(labels == label)
        if members.size < f:
            raise InsufficientSamplesError(
                f"Class {label} has {members.size} samples; {f} are needed for training."
            )
        train.append(rng.choice(members, size=f, replace=False))
    train_idx = np.sort(np.concatenate(train)) if train else np.array([], dtype=np.int64)
    mask = np.ones(labels.size, dtype=bool)
    mask[train_idx] = False
    return SplitPlan(train_idx, np.flatnonzero(mask), f, seed)


@dataclass(frozen=True, eq=False)
class PcaBasis:
    mean: np.ndarray
    """Mean of the training columns, length n."""

    basis: np.ndarray
    """Orthonormal n x k basis of the retained subspace."""

    energy: float

    @property
    def dim(self) -> int:
        return self.basis.shape[1]


def pca_reduce(X: np.ndarray, energy_fraction: float) -> t.Tuple[np.ndarray, PcaBasis]:
    """Project the centred columns of `X` onto the smallest leading singular
    subspace holding at least `energy_fraction` of the squared singular value mass."""
    if not 0 < energy_fraction <= 1:
        raise InvalidParameterError("PCA energy fraction must lie in (0, 1].")
    mean = X.mean(axis=1)
    U, s, _ = scipy.linalg.svd(X - mean[:, np.newaxis], full_matrices=False)
    mass = np.cumsum(s**2)
    if energy_fraction >= 1 or mass[-1] == 0:
        k = s.size
    else:
        k = int(np.searchsorted(mass / mass[-1], energy_fraction * (1 - 1e-12))) + 1
    k = min(max(k, 1), s.size)
    record = PcaBasis(mean, U[:, :k], energy_fraction)
    logger.debug(f"PCA kept {k} of {X.shape[0]} dimensions.")
    return apply_pca(X, record), record


def apply_pca(X: np.ndarray, record: PcaBasis) -> np.ndarray:
    if X.shape[0] != record.mean.size:
        raise DimensionMismatchError("sample dimension", record.mean.size, X.shape[0])
    return record.basis.T @ (X - record.mean[:, np.newaxis])


def invert_pca(Z: np.ndarray, record: PcaBasis) -> np.ndarray:
    return record.basis @ Z + record.mean[:, np.newaxis]


def corrupted_count(fraction: float, n: int) -> int:
    # rounded first so that e.g. 0.29 * 100 floors to 29
    return math.floor(round(fraction * n, 9))


def corrupt_pixels(
    X: np.ndarray, fraction: float, seed: int, mode: str = "uniform"
) -> np.ndarray:
    """Replace `floor(fraction * n)` randomly chosen entries of every sample.

    Replacement values are uniform over `[min(X), max(X)]`, or either bound
    with equal probability in `salt_pepper` mode."""
    if not 0 <= fraction <= 1:
        raise InvalidParameterError("Corruption fraction must lie in [0, 1].")
    if mode not in CORRUPTION_MODES:
        raise InvalidParameterError(f"Unknown corruption mode '{mode}'.")
    n, N = X.shape
    count = corrupted_count(fraction, n)
    out = np.array(X, dtype=np.float64)
    if count == 0:
        return out
    lo, hi = float(X.min()), float(X.max())
    for j in range(N):
        rng = np.random.default_rng([seed, j])
        idx = rng.choice(n, size=count, replace=False)
        if mode == "uniform":
            out[idx, j] = rng.uniform(lo, hi, size=count)
        else:
            out[idx, j] = np.where(rng.random(count) < 0.5, lo, hi)
    return out


def occlude_block(
    X: np.ndarray,
    block_side: int,
    seed: int,
    geometry: t.Optional[t.Tuple[int, int]],
) -> np.ndarray:
    """Set a randomly placed `block_side` square of every image sample to 0."""
    if geometry is None:
        raise DataError("Block occlusion needs image geometry (height and width).")
    height, width = geometry
    if height * width != X.shape[0]:
        raise DimensionMismatchError("image height x width", X.shape[0], height * width)
    if not 0 <= block_side <= min(height, width):
        raise InvalidParameterError(
            f"Block side must lie in [0, {min(height, width)}], got {block_side}."
        )
    out = np.array(X, dtype=np.float64)
    if block_side == 0:
        return out
    for j in range(X.shape[1]):
        rng = np.random.default_rng([seed, j])
        top = int(rng.integers(0, height - block_side + 1))
        left = int(rng.integers(0, width - block_side + 1))
        image = out[:, j].reshape(height, width)
        image[top : top + block_side, left : left + block_side] = 0
        out[:, j] = image.reshape(-1)
    return out


def synth_classes(
    c: int,
    n: int,
    per_class: int,
    separation: float,
    noise_sigma: float,
    seed: int,
) -> t.Tuple[np.ndarray, np.ndarray]:
    """Gaussian blobs around `offset + separation / sqrt(2) * e_i`, clipped at 0.

    Class means are pairwise `separation` apart; samples are ordered by class."""
    if min(c, n, per_class) < 1:
        raise InvalidParameterError("Class count, dimension and class size must be at least 1.")
    if n < c:
        raise InvalidParameterError(f"Dimension {n} cannot hold {c} separated classes.")
    if separation < 0 or noise_sigma < 0:
        raise InvalidParameterError("Separation and noise must be nonnegative.")
    rng = np.random.default_rng(seed)
    offset = 4 * noise_sigma
    X = np.empty((n, c * per_class))
    for label in range(c):
        mean = np.full(n, offset)
        mean[label] += separation / math.sqrt(2)
        noise = rng.standard_normal((n, per_class))
        X[:, label * per_class : (label + 1) * per_class] = (
            mean[:, np.newaxis] + noise_sigma * noise
        )
    labels = np.repeat(np.arange(c), per_class)
    return np.maximum(X, 0.0), labels


def write_dataset(
    directory: str,
    X: np.ndarray,
    labels: np.ndarray,
    classes: int,
    format: str = "rawf64",
    geometry: t.Optional[t.Tuple[int, int]] = None,
    name: str = "dataset",
) -> str:
    """Write features, labels and a manifest to `directory`; returns the manifest path."""
    features = "features" + MATRIX_EXTENSIONS[format]
    save_matrix(os.path.join(directory, features), X, format)
    save_labels(os.path.join(directory, "labels.txt"), labels)
    manifest = DatasetManifest(
        features=features,
        labels="labels.txt",
        classes=classes,
        height=geometry[0] if geometry else None,
        width=geometry[1] if geometry else None,
    )
    path = os.path.join(directory, name + ".json")
    write_manifest(path, manifest)
    return path
