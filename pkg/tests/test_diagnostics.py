import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphcoords.coords import AnchorSet, compute_vc, select_anchors
from graphcoords.diagnostics import (
    count_duplicate_coordinates,
    estimate_ambiguous_edges,
    is_ambiguous,
    spectrum_stability,
)
from graphcoords.graph import Graph

import oracles

PATH3 = Graph.from_edges(3, [(0, 1), (1, 2)])


def _brute_ambiguous(n, edges, P):
    adj = {(min(u, v), max(u, v)) for u, v, *_ in edges}
    count = total = 0
    for u, v in itertools.combinations(range(n), 2):
        if (u, v) in adj:
            continue
        total += 1
        count += all(abs(P[u][i] - P[v][i]) < 1 for i in range(len(P[u])))
    return count, total


def test_path_has_no_ambiguous_pairs():
    P = compute_vc(PATH3, AnchorSet(np.array([0, 2])))
    rep = estimate_ambiguous_edges(PATH3, P, n_samples=1, seed=0)
    assert (rep.sampled_pairs, rep.ambiguous_count, rep.rate) == (1, 0, 0.0)
    assert estimate_ambiguous_edges(PATH3, P, mode="exhaustive").ambiguous_count == 0


def test_identical_rows_are_ambiguous():
    P = np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 5.0]])
    assert is_ambiguous(P, [0], [1]).tolist() == [True]
    assert is_ambiguous(P, [0], [2]).tolist() == [False]
    # exactly 1 apart is not ambiguous (strict inequality)
    assert is_ambiguous(np.array([[0.0], [1.0]]), [0], [1]).tolist() == [False]


def test_errors():
    k4 = Graph.from_edges(4, list(itertools.combinations(range(4), 2)))
    P = compute_vc(k4, AnchorSet(np.array([0])))
    with pytest.raises(ValueError):
        estimate_ambiguous_edges(k4, P)
    P3 = compute_vc(PATH3, AnchorSet(np.array([0])))
    with pytest.raises(ValueError):
        estimate_ambiguous_edges(PATH3, P3, n_samples=2)
    with pytest.raises(ValueError):
        estimate_ambiguous_edges(PATH3, P3, n_samples=0)


@pytest.mark.parametrize("seed", range(6))
def test_exhaustive_and_full_sample_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(20, 120))
    edges = oracles.random_graph(rng, n, 0.06, weighted=bool(seed % 2))
    g = Graph.from_edges(n, edges)
    P = compute_vc(g, select_anchors(g, 4, seed=seed))
    count, total = _brute_ambiguous(n, g.edges(), P.values.tolist())
    ex = estimate_ambiguous_edges(g, P, mode="exhaustive")
    assert (ex.ambiguous_count, ex.sampled_pairs) == (count, total)
    full = estimate_ambiguous_edges(g, P, n_samples=total, seed=seed)
    assert full.rate == ex.rate


def test_sampled_is_seeded():
    rng = np.random.default_rng(8)
    g = Graph.from_edges(80, oracles.random_graph(rng, 80, 0.05, False))
    P = compute_vc(g, select_anchors(g, 3, seed=0))
    a = estimate_ambiguous_edges(g, P, n_samples=200, seed=5)
    b = estimate_ambiguous_edges(g, P, n_samples=200, seed=5)
    assert a == b and a.seed == 5 and a.mode == "sampled"


@settings(max_examples=50, deadline=None)
@given(st.integers(2, 12), st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_predicate_symmetry_and_column_permutation(n, m, seed):
    rng = np.random.default_rng(seed)
    P = rng.integers(0, 4, size=(n, m)).astype(float) + rng.choice([0.0, 0.5], size=(n, m))
    u, v = np.triu_indices(n, 1)
    perm = rng.permutation(m)
    base = is_ambiguous(P, u, v)
    assert np.array_equal(base, is_ambiguous(P, v, u))
    assert np.array_equal(base, is_ambiguous(P[:, perm], u, v))


@pytest.mark.parametrize("seed", range(4))
def test_true_edges_differ_by_at_most_one(seed):
    rng = np.random.default_rng(seed)
    g = Graph.from_edges(100, oracles.random_graph(rng, 100, 0.05, False))
    P = compute_vc(g, select_anchors(g, 10, seed=seed)).values
    # endpoints of an edge share a component, so zero-filled entries cancel
    diff = np.abs(P[g.u] - P[g.v])
    assert diff.max() <= 1.0


def test_duplicates_examples():
    rep = count_duplicate_coordinates(np.array([[0, 1], [0, 1], [2, 0]], dtype=float))
    assert (rep.duplicate_node_count, rep.group_count) == (2, 1)
    rep = count_duplicate_coordinates(np.eye(4))
    assert (rep.duplicate_node_count, rep.group_count) == (0, 0)
    rep = count_duplicate_coordinates(np.array([[1.0], [1.0], [2.0], [2.0], [2.0]]))
    assert (rep.duplicate_node_count, rep.group_count) == (5, 2)


def test_duplicates_tolerance_mode():
    rows = np.array([[0.0, 0.0], [0.0, 1e-9], [5.0, 5.0]])
    assert count_duplicate_coordinates(rows).duplicate_node_count == 0
    rep = count_duplicate_coordinates(rows, tolerance=1e-6)
    assert (rep.duplicate_node_count, rep.group_count) == (2, 1)


def test_duplicates_match_brute_force():
    rng = np.random.default_rng(0)
    rows = rng.integers(0, 3, size=(200, 3)).astype(float)
    groups = {}
    for r in map(tuple, rows):
        groups[r] = groups.get(r, 0) + 1
    big = [c for c in groups.values() if c >= 2]
    rep = count_duplicate_coordinates(rows)
    assert (rep.duplicate_node_count, rep.group_count) == (sum(big), len(big))


def test_spectra_identical_seeds():
    rng = np.random.default_rng(1)
    g = Graph.from_edges(150, oracles.random_graph(rng, 150, 0.04, False))
    st_ = spectrum_stability(g, 10, 2, 7, seed=[4, 4])
    assert st_.sigma.shape == (2, 7)
    assert st_.sigma[0].tobytes() == st_.sigma[1].tobytes()
    assert np.all(st_.spread == 0)


def test_spectra_complete_graph_independent_of_anchors():
    kn = Graph.from_edges(30, list(itertools.combinations(range(30), 2)))
    st_ = spectrum_stability(kn, 5, 6, 5, seed=3)
    np.testing.assert_allclose(st_.sigma, np.broadcast_to(st_.sigma[0], st_.sigma.shape), rtol=1e-12)
    # P = J - I on the anchor rows; its Gram matrix is (N - 2) J + I over anchor columns
    gram_eigs = np.linalg.eigvalsh((30 - 2) * np.ones((5, 5)) + np.eye(5))[::-1]
    np.testing.assert_allclose(st_.sigma[0], np.sqrt(gram_eigs), rtol=1e-12)


def test_spectra_reproducible_and_reported():
    rng = np.random.default_rng(2)
    g = Graph.from_edges(120, oracles.random_graph(rng, 120, 0.05, False))
    a = spectrum_stability(g, 8, 10, 7, seed=11)
    b = spectrum_stability(g, 8, 10, 7, seed=11)
    assert a.sigma.tobytes() == b.sigma.tobytes() and len(set(a.seeds)) == 10
    rec = a.records()
    assert len([k for k in rec if k.startswith("spectrum.set")]) == 10
    with pytest.raises(ValueError):
        spectrum_stability(g, 8, 1, 7)
