"""How well anchor distances resolve the graph.

A non-adjacent pair is *ambiguous* when every anchor distance of the two
nodes differs by less than 1, i.e. the coordinates alone would suggest an
edge.  Nodes with identical coordinate rows cannot be told apart at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .coords import Embedding, PartialDistanceMatrix, compute_vc, select_anchors, singular_spectrum
from .graph import Graph

# beyond this many node pairs, non-edges are drawn by rejection instead of enumeration
_ENUMERATION_LIMIT = 20_000_000


@dataclass
class AmbiguityReport:
    sampled_pairs: int
    ambiguous_count: int
    seed: int | None
    mode: str

    @property
    def rate(self) -> float:
        return self.ambiguous_count / self.sampled_pairs if self.sampled_pairs else 0.0

    def records(self) -> dict:
        return {
            "ambiguity.mode": self.mode,
            "ambiguity.seed": self.seed,
            "ambiguity.sampled_pairs": self.sampled_pairs,
            "ambiguity.ambiguous_count": self.ambiguous_count,
            "ambiguity.rate": self.rate,
        }


@dataclass
class DuplicateReport:
    duplicate_node_count: int
    group_count: int
    n_rows: int

    def records(self) -> dict:
        return {
            "duplicates.duplicate_node_count": self.duplicate_node_count,
            "duplicates.group_count": self.group_count,
            "duplicates.fraction": self.duplicate_node_count / self.n_rows if self.n_rows else 0.0,
        }


def _rows(x) -> np.ndarray:
    if isinstance(x, (PartialDistanceMatrix, Embedding)):
        return x.values
    return np.asarray(x, dtype=np.float64)


def is_ambiguous(P, u, v) -> np.ndarray:
    """Elementwise predicate over node index arrays ``u`` and ``v``."""
    values = _rows(P)
    u = np.atleast_1d(np.asarray(u, dtype=np.int64))
    v = np.atleast_1d(np.asarray(v, dtype=np.int64))
    out = np.empty(len(u), dtype=bool)
    chunk = max(1, 4_000_000 // max(1, values.shape[1]))
    for i in range(0, len(u), chunk):
        diff = np.abs(values[u[i:i + chunk]] - values[v[i:i + chunk]])
        out[i:i + chunk] = diff.max(axis=1, initial=0.0) < 1.0
    return out


def _non_edge_pairs(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    """All unordered non-adjacent pairs ``u < v`` in lexicographic order."""
    n = g.n_nodes
    iu, ju = np.triu_indices(n, k=1)
    keys = iu.astype(np.int64) * n + ju
    mask = ~np.isin(keys, g.edge_keys, assume_unique=True)
    return iu[mask].astype(np.int64), ju[mask].astype(np.int64)


def _count_non_edges(g: Graph) -> int:
    n = g.n_nodes
    return n * (n - 1) // 2 - g.n_edges


def _rejection_sample(g: Graph, n_samples: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n = g.n_nodes
    chosen = np.zeros(0, dtype=np.int64)
    while len(chosen) < n_samples:
        need = n_samples - len(chosen)
        batch = max(1024, int(need * 1.2))
        a = rng.integers(0, n, size=batch)
        b = rng.integers(0, n, size=batch)
        lo, hi = np.minimum(a, b), np.maximum(a, b)
        keys = lo * n + hi
        keys = keys[(lo != hi) & ~np.isin(keys, g.edge_keys)]
        _, first = np.unique(keys, return_index=True)
        keys = keys[np.sort(first)]  # deduplicate, keep draw order
        keys = keys[~np.isin(keys, chosen)]
        chosen = np.concatenate([chosen, keys[:need]])
    return chosen // n, chosen % n


def estimate_ambiguous_edges(
    g: Graph,
    P,
    n_samples: int | None = None,
    seed: int | None = 0,
    mode: str = "sampled",
) -> AmbiguityReport:
    """Count ambiguous pairs among random non-edges (``sampled``) or all of them (``exhaustive``).

    Samples are distinct unordered non-adjacent pairs drawn uniformly
    without replacement.  ``n_samples`` defaults to the number of edges.
    """
    values = _rows(P)
    if values.shape[0] != g.n_nodes:
        raise ValueError("coordinate rows do not match the graph's node count")
    total = _count_non_edges(g)
    if total == 0:
        raise ValueError("graph has no non-edges")
    if mode == "exhaustive":
        u, v = _non_edge_pairs(g)
        return AmbiguityReport(len(u), int(is_ambiguous(values, u, v).sum()), None, "exhaustive")
    if mode != "sampled":
        raise ValueError(f"unknown mode {mode!r}")
    if n_samples is None:
        n_samples = g.n_edges
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if n_samples > total:
        raise ValueError(f"cannot draw {n_samples} distinct non-edges; only {total} exist")
    rng = np.random.default_rng(seed)
    n_pairs = g.n_nodes * (g.n_nodes - 1) // 2
    if n_pairs <= _ENUMERATION_LIMIT:
        u, v = _non_edge_pairs(g)
        pick = rng.choice(len(u), size=n_samples, replace=False)
        u, v = u[pick], v[pick]
    else:
        u, v = _rejection_sample(g, n_samples, rng)
    return AmbiguityReport(n_samples, int(is_ambiguous(values, u, v).sum()), seed, "sampled")


def count_duplicate_coordinates(rows, tolerance: float | None = None) -> DuplicateReport:
    """Group rows that are bitwise identical (or within ``tolerance`` in max-norm, chained).

    Counts every node that shares its row with at least one other node.
    """
    values = np.ascontiguousarray(_rows(rows), dtype=np.float64)
    n = values.shape[0]
    if n == 0:
        return DuplicateReport(0, 0, 0)
    if tolerance is None:
        keyed = values.view(np.dtype((np.void, values.dtype.itemsize * values.shape[1])))
        _, counts = np.unique(keyed.ravel(), return_counts=True)
    else:
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components
        from scipy.spatial import cKDTree

        pairs = cKDTree(values).query_pairs(r=tolerance, p=np.inf, output_type="ndarray")
        adj = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
        _, labels = connected_components(adj, directed=False)
        counts = np.bincount(labels)
    dup = counts[counts >= 2]
    return DuplicateReport(int(dup.sum()), int(len(dup)), n)


@dataclass
class SpectrumStability:
    sigma: np.ndarray  # (k_sets, n_leading)
    seeds: list

    @property
    def spread(self) -> np.ndarray:
        """Per-coordinate ``(max - min) / mean`` across anchor sets."""
        mean = self.sigma.mean(axis=0)
        rng = self.sigma.max(axis=0) - self.sigma.min(axis=0)
        return np.divide(rng, mean, out=np.zeros_like(mean), where=mean > 0)

    def records(self) -> dict:
        rec = {f"spectrum.set{i}": row.tolist() for i, row in enumerate(self.sigma)}
        rec["spectrum.relative_spread"] = self.spread.tolist()
        return rec


def spectrum_stability(
    g: Graph,
    M: int,
    k_sets: int,
    n_leading: int,
    seed: int | Sequence[int] = 0,
    restrict_to_lcc: bool = False,
    threads: int = 1,
) -> SpectrumStability:
    """Leading singular values of ``P`` for ``k_sets`` independently drawn anchor sets.

    ``seed`` is either one base seed (per-set seeds are spawned from it) or
    an explicit per-set list.
    """
    if k_sets < 2:
        raise ValueError("k_sets must be >= 2")
    if isinstance(seed, (list, tuple, np.ndarray)):
        seeds = [int(s) for s in seed]
        if len(seeds) != k_sets:
            raise ValueError("one seed per anchor set required")
    else:
        seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(k_sets)]
    rows = []
    for s in seeds:
        P = compute_vc(g, select_anchors(g, M, s, restrict_to_lcc), threads=threads)
        sig = singular_spectrum(P).sigma[:n_leading]
        rows.append(np.pad(sig, (0, n_leading - len(sig))))
    return SpectrumStability(np.vstack(rows), seeds)
