import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfgc.errors import DataError, ShapeError, UsageError
from pfgc.graph import (
    AttributedGraph,
    classify_edges_by_commonality,
    edge_homophily,
    homophily_ratio,
    neighbor_jaccard,
    normalize,
)

from conftest import random_graph


def test_graph_validation():
    X = np.zeros((2, 1))
    with pytest.raises(DataError):
        AttributedGraph(X, np.array([[0, 1], [0, 0]]))
    with pytest.raises(DataError):
        AttributedGraph(X, np.eye(2))
    with pytest.raises(ShapeError):
        AttributedGraph(X, np.zeros((3, 3)))
    with pytest.raises(DataError):
        AttributedGraph(np.array([[np.nan], [0.0]]), np.zeros((2, 2)))
    with pytest.raises(DataError):
        AttributedGraph(X, np.zeros((2, 2)), labels=np.array([0, 2]))


def test_graph_is_read_only():
    g = AttributedGraph(np.ones((2, 1)), np.array([[0.0, 1.0], [1.0, 0.0]]), np.array([1, 0]))
    assert g.n_clusters == 2 and g.n_edges == 1
    with pytest.raises(ValueError):
        g.features[0, 0] = 5.0


def test_normalize_examples():
    ops = normalize(np.array([[0.0]]))
    assert np.array_equal(ops.adj_norm, [[1.0]])
    assert np.array_equal(ops.laplacian, [[0.0]])

    ops = normalize(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(ops.adj_norm, 0.5 * np.ones((2, 2)), atol=1e-15)
    np.testing.assert_allclose(np.linalg.eigvalsh(ops.laplacian), [0.0, 1.0], atol=1e-12)


def test_normalize_null_vector_and_spectrum(rng):
    for _ in range(5):
        g = random_graph(40, 0.2, rng)
        A = g.adjacency
        ops = normalize(A)
        v = np.sqrt(A.sum(axis=1) + 1.0)
        # connected or not, D^{1/2} 1 is in the null space
        np.testing.assert_allclose(ops.laplacian @ v, 0.0, atol=1e-12)
        lam = np.linalg.eigvalsh(ops.laplacian)
        assert lam.min() >= -1e-8 and lam.max() <= 2 + 1e-8
        np.testing.assert_allclose(ops.laplacian, np.eye(40) - ops.adj_norm, atol=0)
        assert abs(np.trace(ops.laplacian) - (40 - np.trace(ops.adj_norm))) < 1e-10
        again = normalize(A)
        assert np.array_equal(again.adj_norm, ops.adj_norm)


def test_homophily_examples():
    A = np.array([[0, 1], [1, 0]], dtype=float)
    assert homophily_ratio(A, np.array([0, 1])) == 0.0
    assert homophily_ratio(A, np.array([0, 0])) == 1.0
    # star: centre sees 1/3 same, leaves: one same (1), two different (0)
    S = np.zeros((4, 4))
    S[0, 1:] = S[1:, 0] = 1
    assert homophily_ratio(S, np.array([0, 0, 1, 1])) == pytest.approx((1 / 3 + 1 + 0 + 0) / 4)
    assert edge_homophily(S, np.array([0, 0, 1, 1])) == pytest.approx(1 / 3)


def test_homophily_excludes_isolated_and_needs_labels():
    A = np.zeros((3, 3))
    A[0, 1] = A[1, 0] = 1
    assert homophily_ratio(A, np.array([0, 0, 1])) == 1.0
    assert np.isnan(homophily_ratio(np.zeros((2, 2)), np.array([0, 1])))
    with pytest.raises(UsageError):
        homophily_ratio(AttributedGraph(np.ones((2, 1)), np.zeros((2, 2))))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_homophily_invariant_under_relabeling(seed):
    rng = np.random.default_rng(seed)
    g = random_graph(25, 0.2, rng)
    y = rng.integers(0, 4, size=25)
    perm = rng.permutation(4)
    assert homophily_ratio(g.adjacency, y) == homophily_ratio(g.adjacency, perm[y])


def test_jaccard_examples():
    K3 = np.ones((3, 3)) - np.eye(3)
    np.testing.assert_allclose(neighbor_jaccard(K3, [[0, 1]]), [1 / 3])
    # 0 and 1 adjacent, both adjacent to 2 and 3 only otherwise: N_0 = {1,2,3}, N_1 = {0,2,3}
    A = np.zeros((4, 4))
    for i, j in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)]:
        A[i, j] = A[j, i] = 1
    # the same open neighbourhood apart from each other: |{2,3}| / |{0,1,2,3}|
    assert neighbor_jaccard(A, [[0, 1]])[0] == pytest.approx(0.5)
    # identical neighbourhoods (non-adjacent twins)
    B = np.zeros((4, 4))
    for i, j in [(0, 2), (0, 3), (1, 2), (1, 3)]:
        B[i, j] = B[j, i] = 1
    assert neighbor_jaccard(B, [[0, 1]])[0] == 1.0


def test_commonality_symmetric_and_scored(rng):
    g = random_graph(30, 0.2, rng)
    y = rng.integers(0, 3, size=30)
    g = AttributedGraph(g.features, g.adjacency, np.unique(y, return_inverse=True)[1])
    rep = classify_edges_by_commonality(g)
    e = rep.edges
    np.testing.assert_array_equal(rep.jaccard, neighbor_jaccard(g.adjacency, e[:, ::-1]))
    pred, true = rep.predicted_homophilic, rep.truly_homophilic
    assert rep.homophilic_recall == pytest.approx((pred & true).sum() / true.sum())
    rows = rep.rows()
    assert rows[0]["n_edges"] + rows[1]["n_edges"] == g.n_edges
    with pytest.raises(UsageError):
        classify_edges_by_commonality(AttributedGraph(g.features, g.adjacency))
