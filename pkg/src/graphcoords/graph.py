"""Undirected graphs loaded from edge lists, plus components and shortest paths.

Node ids are dense integers ``0..n_nodes-1``.  Edges are stored once per
unordered pair (``u < v``) in sorted order; a symmetric CSR adjacency is
built lazily for traversal.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import BinaryIO, Iterable, Iterator, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph

UNREACHABLE = math.inf
"""Distance reported for nodes not reachable from the source."""

MAX_NODE_ID = np.iinfo(np.int64).max - 1

Source = Union[str, os.PathLike, bytes, BinaryIO, io.TextIOBase]


class GraphFormatError(ValueError):
    """Malformed edge-list input."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def _freeze(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def _canonical_edges(n_nodes: int, u, v, w) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Drop self-loops, orient u < v, sort, and collapse duplicates to the minimum weight."""
    u = np.asarray(u, dtype=np.int64).ravel()
    v = np.asarray(v, dtype=np.int64).ravel()
    w = np.asarray(w, dtype=np.float64).ravel()
    if not (len(u) == len(v) == len(w)):
        raise ValueError("edge arrays must have equal length")
    if len(u) and (u.min() < 0 or v.min() < 0 or u.max() >= n_nodes or v.max() >= n_nodes):
        raise ValueError(f"node id out of range [0, {n_nodes})")
    if len(w) and (np.isnan(w).any() or w.min() < 0):
        raise ValueError("edge weights must be nonnegative")
    keep = u != v
    u, v, w = u[keep], v[keep], w[keep]
    lo, hi = np.minimum(u, v), np.maximum(u, v)
    # sort by (lo, hi, w) so the first of each duplicate run holds the min weight
    order = np.lexsort((w, hi, lo))
    lo, hi, w = lo[order], hi[order], w[order]
    if len(lo):
        first = np.ones(len(lo), dtype=bool)
        first[1:] = (lo[1:] != lo[:-1]) | (hi[1:] != hi[:-1])
        lo, hi, w = lo[first], hi[first], w[first]
    return lo, hi, w


@dataclass(frozen=True, eq=False)
class Graph:
    """Immutable undirected graph with nonnegative edge weights.

    Use :meth:`from_edges` rather than the raw constructor so the edge
    invariants (no self-loops, ``u < v``, no duplicates) hold.
    """

    n_nodes: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    weighted: bool = False

    @classmethod
    def from_edges(
        cls,
        n_nodes: int,
        edges: Iterable[Sequence[float]] | np.ndarray = (),
        weights: Sequence[float] | np.ndarray | None = None,
    ) -> "Graph":
        """Build a graph from ``(u, v)`` or ``(u, v, w)`` tuples.

        ``weights`` may be supplied separately for an ``(E, 2)`` array of
        endpoints.  The graph is weighted iff any weight was supplied.
        """
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges, dtype=np.float64)
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] not in (2, 3):
            raise ValueError("edges must be (u, v) or (u, v, w) rows")
        u = arr[:, 0].astype(np.int64)
        v = arr[:, 1].astype(np.int64)
        weighted = weights is not None or arr.shape[1] == 3
        if weights is not None:
            w = np.asarray(weights, dtype=np.float64)
        elif arr.shape[1] == 3:
            w = arr[:, 2]
        else:
            w = np.ones(len(u))
        return cls.from_arrays(n_nodes, u, v, w, weighted=weighted)

    @classmethod
    def from_arrays(cls, n_nodes: int, u, v, w=None, weighted: bool | None = None) -> "Graph":
        if n_nodes < 0:
            raise ValueError("n_nodes must be nonnegative")
        if weighted is None:
            weighted = w is not None
        if w is None:
            w = np.ones(len(np.asarray(u)))
        lo, hi, ww = _canonical_edges(n_nodes, u, v, w)
        return cls(int(n_nodes), _freeze(lo), _freeze(hi), _freeze(ww), bool(weighted))

    @property
    def n_edges(self) -> int:
        return len(self.u)

    def edges(self) -> Iterator[tuple[int, int, float]]:
        for a, b, c in zip(self.u.tolist(), self.v.tolist(), self.w.tolist()):
            yield a, b, c

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric CSR matrix of edge weights (explicit zeros are edges)."""
        rows = np.concatenate([self.u, self.v])
        cols = np.concatenate([self.v, self.u])
        data = np.concatenate([self.w, self.w])
        a = sp.csr_matrix((data, (rows, cols)), shape=(self.n_nodes, self.n_nodes))
        a.sort_indices()
        return a

    @cached_property
    def edge_keys(self) -> np.ndarray:
        """Sorted ``u * n_nodes + v`` keys, for fast membership tests."""
        return _freeze(self.u * self.n_nodes + self.v)

    def has_edge(self, a: int, b: int) -> bool:
        lo, hi = min(a, b), max(a, b)
        key = lo * self.n_nodes + hi
        i = np.searchsorted(self.edge_keys, key)
        return bool(i < len(self.edge_keys) and self.edge_keys[i] == key)

    def degree(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.u, self.v]), minlength=self.n_nodes)

    def subgraph_mask(self, keep: np.ndarray) -> "Graph":
        """Graph on the same node set keeping only edges with both ends in ``keep``."""
        keep = np.asarray(keep, dtype=bool)
        m = keep[self.u] & keep[self.v]
        return Graph(self.n_nodes, _freeze(self.u[m]), _freeze(self.v[m]), _freeze(self.w[m]), self.weighted)

    def __repr__(self) -> str:
        kind = "weighted" if self.weighted else "unweighted"
        return f"Graph(n_nodes={self.n_nodes}, n_edges={self.n_edges}, {kind})"


@dataclass(frozen=True, eq=False)
class MultilayerGraph:
    """Several edge layers over one shared node set."""

    n_nodes: int
    layers: tuple[Graph, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.layers) < 1:
            raise ValueError("a multilayer graph needs at least one layer")
        for i, g in enumerate(self.layers):
            if g.n_nodes != self.n_nodes:
                raise ValueError(f"layer {i} has {g.n_nodes} nodes, expected {self.n_nodes}")

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    def __len__(self) -> int:
        return len(self.layers)

    def __getitem__(self, i: int) -> Graph:
        return self.layers[i]

    def union(self) -> Graph:
        """All layers' edges merged into one unweighted graph (for reachability)."""
        u = np.concatenate([g.u for g in self.layers])
        v = np.concatenate([g.v for g in self.layers])
        return Graph.from_arrays(self.n_nodes, u, v)


# --------------------------------------------------------------------------
# Loading
# --------------------------------------------------------------------------

def _iter_lines(source: Source) -> Iterator[str]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            for raw in fh:
                yield raw.decode("utf-8")
        return
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    for raw in source:
        yield raw.decode("utf-8") if isinstance(raw, bytes) else raw


def _parse_id(tok: str, lineno: int) -> int:
    try:
        val = int(tok)
    except ValueError:
        raise GraphFormatError(f"node id {tok!r} is not an integer", lineno) from None
    if val < 0:
        raise GraphFormatError(f"negative node id {val}", lineno)
    if val > MAX_NODE_ID:
        raise GraphFormatError(f"node id {val} overflows", lineno)
    return val


def _parse_float(tok: str, lineno: int, what: str) -> float:
    try:
        val = float(tok)
    except ValueError:
        raise GraphFormatError(f"{what} {tok!r} is not a number", lineno) from None
    if not math.isfinite(val):
        raise GraphFormatError(f"{what} {tok!r} is not finite", lineno)
    return val


def _records(source: Source) -> Iterator[tuple[int, list[str]]]:
    """Yield ``(lineno, fields)`` for data lines; the header, if any, is yielded as ``(lineno, ["n", N])``."""
    for lineno, line in enumerate(_iter_lines(source), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        yield lineno, s.split()


def _read_header(fields: list[str], lineno: int) -> int:
    if len(fields) != 2:
        raise GraphFormatError("header must be 'n <N>'", lineno)
    n = _parse_id(fields[1], lineno)
    return n


def _resolve_n(header_n: int | None, max_id: int, lineno_of_max: int) -> int:
    if header_n is None:
        return max_id + 1
    if max_id >= header_n:
        raise GraphFormatError(f"node id {max_id} exceeds header n={header_n}", lineno_of_max)
    return header_n


def load_edge_list(source: Source, mode: str = "unweighted") -> Graph:
    """Read a whitespace-separated edge list.

    Lines are ``u v`` or ``u v w``; ``#`` starts a comment line and an
    optional first data line ``n <N>`` fixes the node count.  In
    ``unweighted`` mode any third column is ignored and every weight is 1.0;
    in ``weighted`` mode a missing weight defaults to 1.0.
    """
    if mode not in ("unweighted", "weighted"):
        raise ValueError(f"unknown mode {mode!r}")
    weighted = mode == "weighted"
    header_n = None
    us: list[int] = []
    vs: list[int] = []
    ws: list[float] = []
    max_id, max_line = -1, 0
    first = True
    for lineno, fields in _records(source):
        if first and fields[0] == "n":
            header_n = _read_header(fields, lineno)
            first = False
            continue
        first = False
        if len(fields) not in (2, 3):
            raise GraphFormatError(f"expected 'u v' or 'u v w', got {len(fields)} fields", lineno)
        a = _parse_id(fields[0], lineno)
        b = _parse_id(fields[1], lineno)
        w = 1.0
        if weighted and len(fields) == 3:
            w = _parse_float(fields[2], lineno, "weight")
            if w < 0:
                raise GraphFormatError(f"negative weight {w}", lineno)
        if max(a, b) > max_id:
            max_id, max_line = max(a, b), lineno
        us.append(a)
        vs.append(b)
        ws.append(w)
    n = _resolve_n(header_n, max_id, max_line)
    return Graph.from_arrays(n, us, vs, ws, weighted=weighted)


TRANSFORMS = {
    "identity": lambda c: c,
    "one_minus": lambda c: 1.0 - c,
}


def load_multilayer_edge_list(source: Source, n_layers: int, transform: str = "identity") -> MultilayerGraph:
    """Read ``u v c1 ... cL`` lines into ``L`` layers.

    A layer edge exists only where its value is positive; its weight is
    ``transform(c)``.  Under ``one_minus`` every value must lie in [0, 1].
    """
    if n_layers < 1:
        raise ValueError("n_layers must be >= 1")
    if transform not in TRANSFORMS:
        raise ValueError(f"unknown transform {transform!r}")
    fn = TRANSFORMS[transform]
    header_n = None
    us: list[list[int]] = [[] for _ in range(n_layers)]
    vs: list[list[int]] = [[] for _ in range(n_layers)]
    ws: list[list[float]] = [[] for _ in range(n_layers)]
    max_id, max_line = -1, 0
    first = True
    for lineno, fields in _records(source):
        if first and fields[0] == "n":
            header_n = _read_header(fields, lineno)
            first = False
            continue
        first = False
        if len(fields) != 2 + n_layers:
            raise GraphFormatError(f"expected {2 + n_layers} fields, got {len(fields)}", lineno)
        a = _parse_id(fields[0], lineno)
        b = _parse_id(fields[1], lineno)
        if max(a, b) > max_id:
            max_id, max_line = max(a, b), lineno
        for i, tok in enumerate(fields[2:]):
            c = _parse_float(tok, lineno, "layer value")
            if transform == "one_minus" and not 0.0 <= c <= 1.0:
                raise GraphFormatError(f"confidence {c} outside [0, 1]", lineno)
            if c <= 0:
                continue
            w = fn(c)
            if w < 0:
                raise GraphFormatError(f"negative weight {w}", lineno)
            us[i].append(a)
            vs[i].append(b)
            ws[i].append(w)
    n = _resolve_n(header_n, max_id, max_line)
    layers = tuple(Graph.from_arrays(n, us[i], vs[i], ws[i], weighted=True) for i in range(n_layers))
    return MultilayerGraph(n, layers)


def write_edge_list(g: Graph, path: str | os.PathLike, header: bool = True) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(f"n {g.n_nodes}\n")
        for a, b, w in g.edges():
            fh.write(f"{a} {b} {w!r}\n" if g.weighted else f"{a} {b}\n")


# --------------------------------------------------------------------------
# Queries
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ComponentLabeling:
    component_id: np.ndarray
    sizes: np.ndarray
    largest_component_id: int

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    def members(self, cid: int) -> np.ndarray:
        return np.flatnonzero(self.component_id == cid)

    def largest_mask(self) -> np.ndarray:
        return self.component_id == self.largest_component_id


def connected_components(g: Graph) -> ComponentLabeling:
    """Label components so ids follow the order of each component's lowest node.

    The largest component is the biggest one; ties go to the lowest id, i.e.
    the component containing the lowest node id.
    """
    if g.n_nodes == 0:
        empty = np.zeros(0, dtype=np.int64)
        return ComponentLabeling(_freeze(empty), _freeze(empty.copy()), -1)
    _, raw = csgraph.connected_components(g.adjacency, directed=False)
    # renumber by first appearance so ids are dense and ordered by lowest member
    _, first_idx, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(len(first_idx), dtype=np.int64)
    rank[np.argsort(first_idx, kind="stable")] = np.arange(len(first_idx))
    labels = rank[inverse].astype(np.int64)
    sizes = np.bincount(labels)
    largest = int(np.argmax(sizes))
    return ComponentLabeling(_freeze(labels), _freeze(sizes), largest)


def sssp(g: Graph, source: int) -> np.ndarray:
    """Exact shortest-path distances from ``source``; unreachable nodes get ``UNREACHABLE``."""
    return multi_source_distances(g, [source])[0]


def multi_source_distances(g: Graph, sources: Sequence[int], threads: int = 1) -> np.ndarray:
    """Rows of single-source distances, one per entry of ``sources``.

    Rows are computed independently, so ``threads > 1`` only changes wall
    time, never the values.
    """
    src = np.asarray(sources, dtype=np.int64).ravel()
    if len(src) and (src.min() < 0 or src.max() >= g.n_nodes):
        raise IndexError(f"source out of range [0, {g.n_nodes})")
    if len(src) == 0:
        return np.zeros((0, g.n_nodes))
    unweighted = not g.weighted or bool(np.all(g.w == 1.0))

    def run(chunk: np.ndarray) -> np.ndarray:
        if unweighted:
            return csgraph.shortest_path(g.adjacency, method="D", directed=False,
                                         unweighted=True, indices=chunk)
        return csgraph.dijkstra(g.adjacency, directed=False, indices=chunk)

    if threads <= 1 or len(src) < 2:
        out = run(src)
    else:
        from concurrent.futures import ThreadPoolExecutor

        chunks = np.array_split(src, min(threads, len(src)))
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = np.vstack(list(pool.map(run, chunks)))
    return np.atleast_2d(out).astype(np.float64, copy=False)
