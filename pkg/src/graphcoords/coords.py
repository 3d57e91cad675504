"""Anchor-based graph coordinates.

A node's virtual coordinates (VC) are its shortest-path distances to ``M``
anchor nodes; stacking them gives the ``N x M`` partial distance matrix.
Topology coordinates (TC) are the leading columns of ``U @ diag(sigma)`` from
its SVD, and directional virtual coordinates (DVC) place every node along the
axis defined by a pair of anchors.

Unreachable distances are stored as 0, so nodes outside the anchors'
component sit at the origin.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from . import matio
from .errors import NumericalError
from .graph import Graph, MultilayerGraph, connected_components, multi_source_distances


@dataclass(frozen=True, eq=False)
class AnchorSet:
    anchor_ids: np.ndarray
    seed: int | None = None
    restricted_to_lcc: bool = False

    def __post_init__(self):
        ids = np.asarray(self.anchor_ids, dtype=np.int64).ravel()
        if len(np.unique(ids)) != len(ids):
            raise ValueError("anchor ids must be distinct")
        ids.setflags(write=False)
        object.__setattr__(self, "anchor_ids", ids)

    def __len__(self) -> int:
        return len(self.anchor_ids)

    @property
    def M(self) -> int:
        return len(self.anchor_ids)

    def column_of(self, node: int) -> int:
        hits = np.flatnonzero(self.anchor_ids == node)
        if len(hits) == 0:
            raise KeyError(f"node {node} is not an anchor")
        return int(hits[0])


@dataclass(frozen=True, eq=False)
class PartialDistanceMatrix:
    values: np.ndarray
    anchors: AnchorSet
    n_unreachable: int = 0

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def anchor_distance(self, a: int, b: int) -> float:
        """Distance between two anchors, zero-filled if unreachable."""
        return float(self.values[a, self.anchors.column_of(b)])


@dataclass(frozen=True, eq=False)
class Embedding:
    values: np.ndarray
    method: str
    provenance: dict = field(default_factory=dict)

    @property
    def n_coords(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class SingularSpectrum:
    sigma: np.ndarray

    def __len__(self) -> int:
        return len(self.sigma)


Matrix = Union[PartialDistanceMatrix, np.ndarray]


def _values(P: Matrix) -> np.ndarray:
    return P.values if isinstance(P, PartialDistanceMatrix) else np.asarray(P, dtype=np.float64)


def _anchor_meta(P: Matrix) -> dict:
    if isinstance(P, PartialDistanceMatrix):
        return {"anchors": P.anchors.anchor_ids.tolist(), "seed": P.anchors.seed}
    return {}


# --------------------------------------------------------------------------
# Anchors and virtual coordinates
# --------------------------------------------------------------------------

def select_anchors(
    g: Graph | MultilayerGraph,
    M: int,
    seed: int | None = 0,
    restrict_to_lcc: bool = False,
) -> AnchorSet:
    """Draw ``M`` distinct anchors uniformly without replacement.

    With ``restrict_to_lcc`` only members of the largest connected component
    are eligible (for a multilayer graph, the component of the union of all
    layers).
    """
    if isinstance(g, MultilayerGraph):
        base = g.union()
    else:
        base = g
    if restrict_to_lcc:
        labels = connected_components(base)
        eligible = labels.members(labels.largest_component_id) if labels.n_components else np.zeros(0, np.int64)
    else:
        eligible = np.arange(base.n_nodes, dtype=np.int64)
    if len(eligible) == 0:
        raise ValueError("no eligible anchor nodes")
    if M < 1 or M > len(eligible):
        raise ValueError(f"cannot draw M={M} anchors from {len(eligible)} eligible nodes")
    rng = np.random.default_rng(seed)
    ids = rng.choice(eligible, size=M, replace=False)
    return AnchorSet(ids, seed=seed, restricted_to_lcc=restrict_to_lcc)


def compute_vc(g: Graph, anchors: AnchorSet | Sequence[int], threads: int = 1) -> PartialDistanceMatrix:
    """Partial distance matrix: column ``i`` holds distances to anchor ``i``, unreachable as 0."""
    if not isinstance(anchors, AnchorSet):
        anchors = AnchorSet(np.asarray(anchors))
    ids = anchors.anchor_ids
    if len(ids) == 0:
        raise ValueError("empty anchor set")
    if ids.min() < 0 or ids.max() >= g.n_nodes:
        raise ValueError(f"anchor id out of range [0, {g.n_nodes})")
    dist = multi_source_distances(g, ids, threads=threads).T
    unreachable = ~np.isfinite(dist)
    values = np.ascontiguousarray(np.where(unreachable, 0.0, dist))
    values.setflags(write=False)
    return PartialDistanceMatrix(values, anchors, int(unreachable.sum()))


# --------------------------------------------------------------------------
# Topology coordinates
# --------------------------------------------------------------------------

def _svd(values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sign-fixed ``U @ diag(sigma)`` and ``sigma`` of a dense matrix."""
    if not np.all(np.isfinite(values)):
        raise NumericalError("partial distance matrix has non-finite entries")
    try:
        U, s, _ = np.linalg.svd(values, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    # flip each column so its largest-magnitude entry is positive; argmax takes the lowest row on ties
    pivot = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivot, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * (signs * s), s


def singular_spectrum(P: Matrix) -> SingularSpectrum:
    values = _values(P)
    if not np.all(np.isfinite(values)):
        raise NumericalError("partial distance matrix has non-finite entries")
    try:
        s = np.linalg.svd(values, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge: {exc}") from exc
    M = values.shape[1]
    if len(s) < M:
        s = np.concatenate([s, np.zeros(M - len(s))])
    return SingularSpectrum(s)


def choose_nc_by_variance(spectrum: SingularSpectrum | Sequence[float], p: float) -> int:
    """Smallest ``n_c`` whose leading squared singular values exceed ``p`` of the total."""
    sigma = spectrum.sigma if isinstance(spectrum, SingularSpectrum) else np.asarray(spectrum, dtype=np.float64)
    if len(sigma) == 0:
        raise ValueError("empty spectrum")
    if not 0.0 < p < 1.0:
        raise ValueError(f"captured variance p must lie in (0, 1), got {p}")
    cum = np.cumsum(sigma.astype(np.float64) ** 2)
    total = cum[-1]
    if total == 0:
        raise ValueError("all-zero spectrum")
    return int(np.searchsorted(cum, p * total, side="right")) + 1


def compute_tc(P: Matrix, n_c: int | None = None, variance: float | None = None) -> Embedding:
    """Topology coordinates from a fixed ``n_c`` or a captured-variance fraction."""
    if (n_c is None) == (variance is None):
        raise ValueError("give exactly one of n_c or variance")
    values = _values(P)
    M = values.shape[1]
    us, s = _svd(values)
    if variance is not None:
        full = np.concatenate([s, np.zeros(M - len(s))]) if len(s) < M else s
        n_c = choose_nc_by_variance(SingularSpectrum(full), variance)
    if not 1 <= n_c <= M:
        raise ValueError(f"n_c={n_c} outside [1, {M}]")
    coords = us[:, :n_c]
    if coords.shape[1] < n_c:
        coords = np.hstack([coords, np.zeros((coords.shape[0], n_c - coords.shape[1]))])
    prov = {**_anchor_meta(P), "method": "tc", "n_c": int(n_c), "M": M}
    if variance is not None:
        prov["variance"] = float(variance)
    return Embedding(np.ascontiguousarray(coords), "tc", prov)


# --------------------------------------------------------------------------
# Directional virtual coordinates
# --------------------------------------------------------------------------

def _valid_pair_distance(d: float) -> bool:
    return np.isfinite(d) and d > 0


def pair_anchors(
    anchors: AnchorSet | Sequence[int],
    seed: int | None = 0,
    P: PartialDistanceMatrix | None = None,
) -> list[tuple[int, int]]:
    """Disjoint random anchor pairs from a seeded shuffle.

    When ``P`` is given, a pair whose anchors are at distance 0 or mutually
    unreachable is rejected and the first anchor is tried against the next
    candidate; more than ``M`` rejections in total is an error.  Anchors left
    without a partner are dropped with a warning.
    """
    ids = anchors.anchor_ids if isinstance(anchors, AnchorSet) else np.asarray(anchors, dtype=np.int64)
    M = len(ids)
    if M < 2:
        raise ValueError("need at least two anchors to form a pair")
    rng = np.random.default_rng(seed)
    pool = [int(x) for x in ids[rng.permutation(M)]]
    if P is None:
        if M % 2:
            warnings.warn(f"odd anchor count {M}: dropping anchor {pool[-1]}", stacklevel=2)
        return [(pool[i], pool[i + 1]) for i in range(0, M - 1, 2)]

    pairs: list[tuple[int, int]] = []
    rejected = 0
    dropped: list[int] = []
    while len(pool) >= 2:
        a = pool.pop(0)
        for j, b in enumerate(pool):
            if _valid_pair_distance(P.anchor_distance(a, b)):
                pairs.append((a, b))
                del pool[j]
                break
            rejected += 1
            if rejected > M:
                raise ValueError(f"could not pair anchors: more than {M} rejected pairs")
        else:
            dropped.append(a)
    dropped.extend(pool)
    if dropped:
        warnings.warn(f"dropping {len(dropped)} unpaired anchor(s): {dropped[:10]}", stacklevel=2)
    return pairs


def compute_dvc(
    P: PartialDistanceMatrix | np.ndarray,
    pairs: Sequence[tuple[int, int]],
    anchor_distances: Sequence[float] | None = None,
    anchors: AnchorSet | Sequence[int] | None = None,
) -> Embedding:
    """One ordinate per anchor pair ``(p, q)``: ``(d_p - d_q)(d_p + d_q) / (2 d_pq)``.

    ``pairs`` name anchor node ids.  ``anchor_distances`` defaults to the
    pair distances read from ``P``; for a bare array, ``anchors`` gives the
    column order.
    """
    values = _values(P)
    if isinstance(P, PartialDistanceMatrix):
        aset = P.anchors
    elif anchors is not None:
        aset = anchors if isinstance(anchors, AnchorSet) else AnchorSet(np.asarray(anchors))
    else:
        raise ValueError("bare matrix input needs the anchor column order")
    if len(pairs) == 0:
        raise ValueError("no anchor pairs")
    cols_p = np.array([aset.column_of(a) for a, _ in pairs])
    cols_q = np.array([aset.column_of(b) for _, b in pairs])
    if anchor_distances is None:
        d = np.array([values[a, cq] for (a, _), cq in zip(pairs, cols_q)], dtype=np.float64)
    else:
        d = np.asarray(anchor_distances, dtype=np.float64)
        if len(d) != len(pairs):
            raise ValueError("one anchor distance per pair required")
    for (a, b), dist in zip(pairs, d):
        if a == b or not _valid_pair_distance(dist):
            raise ValueError(f"anchor pair ({a}, {b}) is coincident or unreachable (d={dist})")
    dp = values[:, cols_p]
    dq = values[:, cols_q]
    ordinates = (dp - dq) * (dp + dq) / (2.0 * d)
    prov = {
        "anchors": aset.anchor_ids.tolist(),
        "seed": aset.seed,
        "method": "dvc",
        "n_c": len(pairs),
        "M": values.shape[1],
        "pairs": [f"{a}:{b}" for a, b in pairs],
    }
    return Embedding(np.ascontiguousarray(ordinates), "dvc", prov)


def dvc_from_graph(
    P: PartialDistanceMatrix,
    seed: int | None = None,
    n_pairs: int | None = None,
) -> Embedding:
    """Pair ``P``'s anchors (seeded) and compute DVCs, optionally keeping the first ``n_pairs``."""
    pair_seed = P.anchors.seed if seed is None else seed
    pairs = pair_anchors(P.anchors, pair_seed, P=P)
    if n_pairs is not None:
        if n_pairs > len(pairs):
            raise ValueError(f"requested {n_pairs} pairs but only {len(pairs)} are available")
        pairs = pairs[:n_pairs]
    emb = compute_dvc(P, pairs)
    emb.provenance["pair_seed"] = pair_seed
    return emb


# --------------------------------------------------------------------------
# Multilayer
# --------------------------------------------------------------------------

def _per_layer(value, L: int, name: str) -> list:
    if isinstance(value, (list, tuple)):
        if len(value) != L:
            raise ValueError(f"{name} needs one entry per layer ({L})")
        return list(value)
    return [value] * L


def compute_multilayer_coords(
    mg: MultilayerGraph,
    anchors: AnchorSet,
    method: str | Sequence[str] = "tc",
    n_c: int | Sequence[int | None] | None = None,
    variance: float | Sequence[float | None] | None = None,
    n_pairs: int | Sequence[int | None] | None = None,
    pair_seed: int | None = None,
    threads: int = 1,
) -> list[Embedding]:
    """One embedding per layer, all from the same anchor set."""
    L = mg.n_layers
    methods = _per_layer(method, L, "method")
    ncs = _per_layer(n_c, L, "n_c")
    variances = _per_layer(variance, L, "variance")
    npairs = _per_layer(n_pairs, L, "n_pairs")
    out = []
    for i, g in enumerate(mg.layers):
        P = compute_vc(g, anchors, threads=threads)
        if methods[i] == "tc":
            emb = compute_tc(P, n_c=ncs[i], variance=variances[i])
        elif methods[i] == "dvc":
            emb = dvc_from_graph(P, seed=pair_seed, n_pairs=npairs[i])
        else:
            raise ValueError(f"unknown method {methods[i]!r}")
        emb.provenance["layer"] = i
        out.append(emb)
    return out


# --------------------------------------------------------------------------
# Persistence
# --------------------------------------------------------------------------

def provenance_path(path: str | os.PathLike) -> str:
    return os.fspath(path) + ".prov"


def save_embedding(path: str | os.PathLike, emb: Embedding, text: bool = False) -> None:
    """Write the coordinates as GCMAT1 (or text) plus a ``.prov`` sidecar."""
    if text:
        matio.write_text_matrix(path, emb.values)
    else:
        matio.write_matrix(path, emb.values)
    record = {"method": emb.method, "rows": emb.values.shape[0], "cols": emb.values.shape[1]}
    record.update({k: v for k, v in emb.provenance.items() if k != "method" and v is not None})
    record["unreachable_policy"] = "zero_fill"
    matio.write_kv(provenance_path(path), record)


def load_embedding(path: str | os.PathLike) -> Embedding:
    values = matio.read_matrix(path)
    prov: dict = {}
    method = "unknown"
    side = provenance_path(path)
    if os.path.exists(side):
        prov = dict(matio.read_kv(side))
        method = prov.pop("method", method)
    return Embedding(values, method, prov)
