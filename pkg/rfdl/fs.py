import os
import tempfile
import typing as t
from contextlib import contextmanager

import xxhash

from rfdl.errors import silent_exec


class Path(str):
    def __new__(cls, *args, **kwargs):
        self = super().__new__(cls, *args, **kwargs)
        if not (os.path.isfile(self) or os.path.isdir(self)):
            raise FileNotFoundError(self)
        return self


class File(Path):
    def __new__(cls, *args, **kwargs):
        self = str.__new__(cls, *args, **kwargs)
        if not os.path.isfile(self):
            raise FileNotFoundError(self)
        return self


class Directory(Path):
    def __new__(cls, *args, **kwargs):
        self = str.__new__(cls, *args, **kwargs)
        if not os.path.isdir(self):
            raise FileNotFoundError(self)
        return self


def resolve_relative(base: str, path: str) -> str:
    """Resolve `path` against the directory containing the file `base`."""
    if os.path.isabs(path):
        return path
    return os.path.normpath(os.path.join(os.path.dirname(base) or ".", path))


def ensure_dir(path: str) -> Directory:
    os.makedirs(path, exist_ok=True)
    return Directory(path)


@contextmanager
def atomic_write(dest: str, mode="w"):
    """Write to a temporary file next to :param:`dest`, then rename it over
    :param:`dest` once the block completes without error."""
    directory = os.path.dirname(os.path.abspath(dest))
    os.makedirs(directory, exist_ok=True)
    fd, temp = tempfile.mkstemp(
        prefix="." + os.path.basename(dest) + ".", suffix="_rfdl", dir=directory
    )
    os.close(fd)
    try:
        newline = "" if "b" not in mode else None
        with open(temp, mode, newline=newline) as file:
            yield file
        os.replace(temp, dest)
    finally:
        if os.path.isfile(temp):
            silent_exec(os.remove, temp)


def hash_arrays(*arrays: t.Any) -> str:
    """Hash the shape, dtype and contents of each array with xxh64."""
    digest = xxhash.xxh64()
    for arr in arrays:
        digest.update(repr((arr.shape, str(arr.dtype))).encode())
        digest.update(arr.tobytes(order="C"))
    return digest.hexdigest()


def file_hash(path: File) -> str:
    with open(path, "rb") as f:
        digest = xxhash.xxh64()
        chunk = f.read(65536)
        while chunk:
            digest.update(chunk)
            chunk = f.read(65536)
    return digest.hexdigest()
