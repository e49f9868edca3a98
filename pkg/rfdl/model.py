"""Learned models and their on-disk container.

A model file is laid out as::

    b"RFDLMDL\\0" | u32 format version | u32 header length | JSON header | arrays

All integers are little-endian. The JSON header is UTF-8 with sorted keys and
lists each stored array with its shape; the arrays follow in that order as
little-endian 64 bit floats, row-major.
"""
import json
import logging
import os
import struct
import typing as t
from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from dataclasses import replace

import numpy as np

from rfdl.config import HyperParams
from rfdl.config import dataclass_fromdict
from rfdl.data import PcaBasis
from rfdl.data import apply_pca
from rfdl.errors import DataError
from rfdl.errors import DimensionMismatchError
from rfdl.errors import ExceptionCount
from rfdl.errors import MatrixFormatError
from rfdl.fs import atomic_write

logger = logging.getLogger(__name__)

MAGIC = b"RFDLMDL\0"
FORMAT_VERSION = 1
PREFIX = struct.Struct("<8sII")

SIDECAR_NAME = "model.json"


def _frozen(arr: t.Optional[np.ndarray]) -> t.Optional[np.ndarray]:
    if arr is None:
        return None
    arr = np.array(arr, dtype=np.float64, order="C")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Model:
    """Projection P (K x n), dictionary D (r x K) and optional classifier C (K x c).

    Arrays are read-only once the model is constructed."""

    method: str
    P: np.ndarray
    D: np.ndarray
    params: HyperParams = field(default_factory=HyperParams)
    C: t.Optional[np.ndarray] = None
    pca: t.Optional[PcaBasis] = None

    def __post_init__(self):
        object.__setattr__(self, "P", _frozen(self.P))
        object.__setattr__(self, "D", _frozen(self.D))
        object.__setattr__(self, "C", _frozen(self.C))
        if self.D.shape[1] != self.P.shape[0]:
            raise DimensionMismatchError("dictionary atoms", self.P.shape[0], self.D.shape[1])
        if self.C is not None and self.C.shape[0] != self.P.shape[0]:
            raise DimensionMismatchError("classifier rows", self.P.shape[0], self.C.shape[0])
        if self.pca is not None and self.pca.dim != self.P.shape[1]:
            raise DimensionMismatchError("PCA dimension", self.P.shape[1], self.pca.dim)

    @property
    def dict_size(self) -> int:
        return self.P.shape[0]

    @property
    def feature_dim(self) -> int:
        """Dimension of the samples :meth:`transform` accepts."""
        if self.pca is not None:
            return self.pca.mean.size
        return self.P.shape[1]

    @property
    def class_count(self) -> t.Optional[int]:
        return None if self.C is None else self.C.shape[1]

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Apply the recorded preprocessing to raw samples."""
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] != self.feature_dim:
            raise DimensionMismatchError("sample dimension", self.feature_dim, X.shape[0])
        if self.pca is not None:
            return apply_pca(X, self.pca)
        return X

    def with_classifier(self, C: np.ndarray) -> "Model":
        return replace(self, C=C)

    def with_pca(self, pca: t.Optional[PcaBasis]) -> "Model":
        return replace(self, pca=pca)


def _arrays(model: Model) -> t.List[t.Tuple[str, np.ndarray]]:
    arrays = [("P", model.P), ("D", model.D)]
    if model.C is not None:
        arrays.append(("C", model.C))
    if model.pca is not None:
        arrays.append(("pca_mean", model.pca.mean.reshape(1, -1)))
        arrays.append(("pca_basis", model.pca.basis))
    return arrays


def dumps(model: Model) -> bytes:
    arrays = _arrays(model)
    header = {
        "method": model.method,
        "params": asdict(model.params),
        "arrays": [{"name": name, "shape": list(arr.shape)} for name, arr in arrays],
        "pca_energy": model.pca.energy if model.pca is not None else None,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    chunks = [PREFIX.pack(MAGIC, FORMAT_VERSION, len(header_bytes)), header_bytes]
    chunks.extend(arr.astype("<f8").tobytes(order="C") for _, arr in arrays)
    return b"".join(chunks)


def loads(data: bytes, source: str = "<bytes>") -> Model:
    if len(data) < PREFIX.size:
        raise MatrixFormatError(f"'{source}' is too short to be a model file.")
    magic, version, header_len = PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise MatrixFormatError(f"'{source}' is not a model file.")
    if version != FORMAT_VERSION:
        raise MatrixFormatError(
            f"'{source}' uses model format {version}; only {FORMAT_VERSION} is supported."
        )
    offset = PREFIX.size + header_len
    try:
        header = json.loads(data[PREFIX.size : offset].decode())
    except (UnicodeDecodeError, ValueError):
        raise MatrixFormatError(f"'{source}' has a corrupt header.")

    arrays: t.Dict[str, np.ndarray] = {}
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        size = int(np.prod(shape)) * 8
        if offset + size > len(data):
            raise MatrixFormatError(f"'{source}' is truncated.")
        arrays[entry["name"]] = np.frombuffer(
            data, dtype="<f8", count=size // 8, offset=offset
        ).reshape(shape)
        offset += size
    if offset != len(data):
        raise MatrixFormatError(f"'{source}' has trailing data.")

    try:
        params = dataclass_fromdict(header["params"], HyperParams)
    except ExceptionCount:
        raise MatrixFormatError(f"'{source}' holds invalid hyperparameters.")
    pca = None
    if "pca_basis" in arrays:
        pca = PcaBasis(
            arrays["pca_mean"].reshape(-1).copy(),
            arrays["pca_basis"].copy(),
            header["pca_energy"],
        )
    return Model(
        method=header["method"],
        P=arrays["P"],
        D=arrays["D"],
        params=params,
        C=arrays.get("C"),
        pca=pca,
    )


def save_model(path: str, model: Model) -> None:
    with atomic_write(path, "wb") as file:
        file.write(dumps(model))


def load_model(path: str) -> Model:
    try:
        with open(path, "rb") as file:
            data = file.read()
    except FileNotFoundError:
        raise DataError(f"Model file '{path}' does not exist.")
    return loads(data, path)


def sidecar_path(model_path: str) -> str:
    return os.path.join(os.path.dirname(os.path.abspath(model_path)), SIDECAR_NAME)


def write_sidecar(model_path: str, metadata: t.Dict[str, t.Any]) -> None:
    with atomic_write(sidecar_path(model_path)) as file:
        json.dump(metadata, file, indent=2, sort_keys=True)
        file.write("\n")


def read_sidecar(model_path: str) -> t.Dict[str, t.Any]:
    """Metadata written next to a model, or an empty dict if there is none."""
    try:
        with open(sidecar_path(model_path)) as file:
            return json.load(file)
    except FileNotFoundError:
        logger.debug(f"No metadata found next to '{model_path}'.")
        return {}
    except ValueError:
        raise DataError(f"Model metadata '{sidecar_path(model_path)}' is corrupt.")
