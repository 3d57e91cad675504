"""GCMAT1 dense-matrix files and key-value sidecars.

Binary layout: the 6-byte magic ``GCMAT1``, then ``rows`` and ``cols`` as
little-endian u64, then ``rows * cols`` little-endian f64 in row-major order.
"""

from __future__ import annotations

import os
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"GCMAT1"
_HEADER = struct.Struct("<6sQQ")


class MatrixFormatError(ValueError):
    pass


def write_matrix(path: str | os.PathLike, values: np.ndarray) -> None:
    a = np.asarray(values, dtype="<f8")
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2:
        raise ValueError("only 2-d matrices can be written")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, a.shape[0], a.shape[1]))
        fh.write(np.ascontiguousarray(a).tobytes())


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise MatrixFormatError(f"{path}: truncated header")
        magic, rows, cols = _HEADER.unpack(head)
        if magic != MAGIC:
            raise MatrixFormatError(f"{path}: bad magic {magic!r}")
        body = fh.read()
    if len(body) != rows * cols * 8:
        raise MatrixFormatError(f"{path}: expected {rows * cols * 8} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(rows, cols).astype(np.float64)


def is_gcmat(path: str | os.PathLike) -> bool:
    with open(path, "rb") as fh:
        return fh.read(len(MAGIC)) == MAGIC


def write_text_matrix(path: str | os.PathLike, values: np.ndarray) -> None:
    """Debug export: one row per line, space-separated, round-trippable reprs."""
    a = np.atleast_2d(np.asarray(values, dtype=np.float64))
    with open(path, "w", encoding="utf-8") as fh:
        for row in a:
            fh.write(" ".join(repr(float(x)) for x in row))
            fh.write("\n")


def read_csv_matrix(path: str | os.PathLike) -> np.ndarray:
    """Dense CSV with an optional header row."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    skip = 0
    try:
        [float(t) for t in first.strip().split(",") if t.strip()]
    except ValueError:
        skip = 1
    return np.atleast_2d(np.loadtxt(path, delimiter=",", skiprows=skip, dtype=np.float64, ndmin=2))


def read_dense(path: str | os.PathLike) -> np.ndarray:
    """Read a GCMAT1 file or, failing the magic check, a CSV."""
    return read_matrix(path) if is_gcmat(path) else read_csv_matrix(path)


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return ",".join(format_value(x) for x in (v.tolist() if isinstance(v, np.ndarray) else v))
    if isinstance(v, np.generic):
        return format_value(v.item())
    return str(v)


def write_kv(path: str | os.PathLike, record: Mapping[str, object]) -> None:
    """One ``key = value`` line per entry, in insertion order."""
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in record.items():
            fh.write(f"{k} = {format_value(v)}\n")


def read_kv(path: str | os.PathLike) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        key, sep, val = s.partition("=")
        if not sep:
            raise ValueError(f"{path}: not a key = value line: {line!r}")
        out[key.strip()] = val.strip()
    return out
