"""Per-node representation vectors, splits, labels and train-split standardization."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .coords import Embedding
from .errors import DataError

SPLIT_NAMES = ("none", "train", "valid", "test")
NONE, TRAIN, VALID, TEST = range(4)


@dataclass(frozen=True)
class Block:
    name: str
    start: int
    stop: int

    @property
    def width(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    values: np.ndarray
    blocks: tuple[Block, ...] = field(default_factory=tuple)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def block(self, name: str) -> np.ndarray:
        for b in self.blocks:
            if b.name == name:
                return self.values[:, b.start:b.stop]
        raise KeyError(name)


Source = Union[Embedding, np.ndarray, tuple]


def _source_array(src: Source, index: int) -> tuple[str, np.ndarray]:
    if isinstance(src, tuple):
        name, arr = src
        if isinstance(arr, Embedding):
            arr = arr.values
    elif isinstance(src, Embedding):
        layer = src.provenance.get("layer")
        name = f"{src.method}" + (f"[{layer}]" if layer is not None else f"#{index}")
        arr = src.values
    else:
        name, arr = f"dense#{index}", src
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return name, arr


def concat_representation(sources: Sequence[Source]) -> FeatureMatrix:
    """Column-wise concatenation in the given order, recording each source's column range.

    A source is an :class:`Embedding`, a dense array, or a ``(name, array)`` pair.
    """
    if len(sources) == 0:
        raise ValueError("nothing to concatenate")
    named = [_source_array(s, i) for i, s in enumerate(sources)]
    n = named[0][1].shape[0]
    blocks = []
    col = 0
    for name, arr in named:
        if arr.shape[0] != n:
            raise DataError(f"source {name!r} has {arr.shape[0]} rows, expected {n}")
        blocks.append(Block(name, col, col + arr.shape[1]))
        col += arr.shape[1]
    values = np.hstack([arr for _, arr in named])
    return FeatureMatrix(values, tuple(blocks))


def one_hot(categories: Sequence[int] | np.ndarray, K: int) -> np.ndarray:
    cats = np.asarray(categories)
    if cats.ndim != 1:
        raise ValueError("categories must be one id per node")
    if not np.issubdtype(cats.dtype, np.integer):
        if not np.all(cats == np.round(cats)):
            raise DataError("category ids must be integers")
        cats = cats.astype(np.int64)
    if len(cats) and (cats.min() < 0 or cats.max() >= K):
        raise DataError(f"category id out of range [0, {K})")
    out = np.zeros((len(cats), K))
    out[np.arange(len(cats)), cats] = 1.0
    return out


# --------------------------------------------------------------------------
# Splits and labels
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SplitAssignment:
    """Per-node split code: 0 none, 1 train, 2 valid, 3 test."""

    codes: np.ndarray

    @classmethod
    def from_indices(cls, n_nodes: int, train=(), valid=(), test=()) -> "SplitAssignment":
        codes = np.zeros(n_nodes, dtype=np.int8)
        seen = np.zeros(n_nodes, dtype=bool)
        for code, idx in ((TRAIN, train), (VALID, valid), (TEST, test)):
            idx = np.asarray(idx, dtype=np.int64)
            if seen[idx].any():
                raise DataError("split sets overlap")
            seen[idx] = True
            codes[idx] = code
        return cls(codes)

    def indices(self, name: str) -> np.ndarray:
        return np.flatnonzero(self.codes == SPLIT_NAMES.index(name))

    @property
    def train(self) -> np.ndarray:
        return self.indices("train")

    @property
    def valid(self) -> np.ndarray:
        return self.indices("valid")

    @property
    def test(self) -> np.ndarray:
        return self.indices("test")

    def __len__(self) -> int:
        return len(self.codes)


def random_split(n_nodes: int, fractions=(0.6, 0.2, 0.2), seed: int = 0) -> SplitAssignment:
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n_nodes)
    a = int(round(fractions[0] * n_nodes))
    b = a + int(round(fractions[1] * n_nodes))
    return SplitAssignment.from_indices(n_nodes, perm[:a], perm[a:b], perm[b:])


def load_splits(path: str | os.PathLike, n_nodes: int) -> SplitAssignment:
    """Read ``node_id label`` lines with label in train/valid/test."""
    codes = np.zeros(n_nodes, dtype=np.int8)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2 or parts[1] not in SPLIT_NAMES[1:]:
                raise DataError(f"{path}:{lineno}: expected 'node_id train|valid|test'")
            node = int(parts[0])
            if not 0 <= node < n_nodes:
                raise DataError(f"{path}:{lineno}: node {node} out of range")
            if codes[node]:
                raise DataError(f"{path}:{lineno}: node {node} assigned twice")
            codes[node] = SPLIT_NAMES.index(parts[1])
    return SplitAssignment(codes)


def write_splits(path: str | os.PathLike, split: SplitAssignment) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for node, code in enumerate(split.codes.tolist()):
            if code:
                fh.write(f"{node} {SPLIT_NAMES[code]}\n")


def load_labels(path: str | os.PathLike, n_nodes: int) -> np.ndarray:
    """``node_id label`` (multiclass, returns int vector with -1 for missing) or
    ``node_id b_0 ... b_{T-1}`` (multilabel, returns an ``N x T`` 0/1 matrix)."""
    rows: dict[int, list[str]] = {}
    width = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if width is None:
                width = len(parts) - 1
            if len(parts) - 1 != width or width < 1:
                raise DataError(f"{path}:{lineno}: inconsistent label width")
            node = int(parts[0])
            if not 0 <= node < n_nodes:
                raise DataError(f"{path}:{lineno}: node {node} out of range")
            rows[node] = parts[1:]
    if width == 1:
        y = np.full(n_nodes, -1, dtype=np.int64)
        for node, (lab,) in rows.items():
            y[node] = int(lab)
        return y
    y = np.zeros((n_nodes, width or 0), dtype=np.float64)
    for node, labs in rows.items():
        vals = np.array([float(t) for t in labs])
        if not np.all((vals == 0) | (vals == 1)):
            raise DataError(f"{path}: multilabel targets must be 0/1 (node {node})")
        y[node] = vals
    return y


def load_categories(path: str | os.PathLike, n_nodes: int) -> np.ndarray:
    """``node_id category`` lines; every node must be listed."""
    cats = np.full(n_nodes, -1, dtype=np.int64)
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s or s.startswith("#"):
                continue
            parts = s.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'node_id category'")
            cats[int(parts[0])] = int(parts[1])
    if (cats < 0).any():
        raise DataError(f"{path}: {int((cats < 0).sum())} nodes have no category")
    return cats


# --------------------------------------------------------------------------
# Normalization
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class NormStats:
    mu: np.ndarray
    sigma: np.ndarray

    @property
    def divisor(self) -> np.ndarray:
        # constant training columns divide by 1 so they normalize to exactly 0
        return np.where(self.sigma > 0, self.sigma, 1.0)


def _values(fm) -> np.ndarray:
    return fm.values if isinstance(fm, FeatureMatrix) else np.asarray(fm, dtype=np.float64)


def fit_normalizer(fm: FeatureMatrix | np.ndarray, split: SplitAssignment | np.ndarray) -> NormStats:
    """Per-column mean and population standard deviation over training rows."""
    X = _values(fm)
    rows = split.train if isinstance(split, SplitAssignment) else np.asarray(split, dtype=np.int64)
    if len(rows) == 0:
        raise DataError("empty training set")
    Xt = X[rows]
    mu = Xt.mean(axis=0)
    sigma = Xt.std(axis=0)
    # a rounded mean can leave a ~1e-17 std on constant columns
    const = Xt.min(axis=0) == Xt.max(axis=0)
    mu[const] = Xt[0, const]
    sigma[const] = 0.0
    return NormStats(mu, sigma)


def apply_normalizer(fm: FeatureMatrix | np.ndarray, stats: NormStats) -> FeatureMatrix:
    X = _values(fm)
    if X.shape[1] != len(stats.mu):
        raise DataError(f"feature width {X.shape[1]} does not match stats width {len(stats.mu)}")
    blocks = fm.blocks if isinstance(fm, FeatureMatrix) else (Block("dense#0", 0, X.shape[1]),)
    return FeatureMatrix((X - stats.mu) / stats.divisor, blocks)
