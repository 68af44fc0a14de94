import pickle

import numpy as np
import pytest
import scipy.sparse as sp

from pfgc.errors import ConfigError, DataError, LoadError, ShapeError
from pfgc.io import load_graph, write_canonical_csv, write_edges_csv


def _write(path, name, text):
    (path / name).write_text(text, encoding="utf-8")


def test_canonical_roundtrip(tmp_path, small_graph):
    write_canonical_csv(small_graph, tmp_path / "ds")
    g = load_graph(tmp_path / "ds")
    np.testing.assert_array_equal(g.features, small_graph.features)
    np.testing.assert_array_equal(g.adjacency, small_graph.adjacency)
    np.testing.assert_array_equal(g.labels, small_graph.labels)


def test_empty_edges_and_symmetrization(tmp_path):
    _write(tmp_path, "nodes.csv", "id,label,f0\n0,0,1\n1,1,0\n2,0,2\n")
    _write(tmp_path, "edges.csv", "src,dst\n")
    g = load_graph(tmp_path)
    assert np.array_equal(g.adjacency, np.zeros((3, 3)))
    _write(tmp_path, "edges.csv", "src,dst\n0,1\n2,2\n0,1\n")
    g = load_graph(tmp_path)
    assert g.adjacency[0, 1] == g.adjacency[1, 0] == 1
    assert g.adjacency[2, 2] == 0 and g.n_edges == 1


def test_labels_remapped_and_unlabelled(tmp_path):
    _write(tmp_path, "nodes.csv", "id,label,f0\n1,7,1\n0,3,0\n")
    _write(tmp_path, "edges.csv", "src,dst\n0,1\n")
    g = load_graph(tmp_path)
    assert g.labels.tolist() == [0, 1] and g.n_clusters == 2
    np.testing.assert_array_equal(g.features[:, 0], [0.0, 1.0])
    _write(tmp_path, "nodes.csv", "id,label,f0\n0,-1,1\n1,-1,0\n")
    g = load_graph(tmp_path, n_clusters=2)
    assert g.labels is None and g.n_clusters == 2


def test_load_errors(tmp_path):
    with pytest.raises(LoadError):
        load_graph(tmp_path / "nope")
    with pytest.raises(LoadError):
        load_graph(tmp_path)
    _write(tmp_path, "nodes.csv", "id,label,f0\n0,0,nan\n")
    _write(tmp_path, "edges.csv", "src,dst\n")
    with pytest.raises(DataError):
        load_graph(tmp_path)
    _write(tmp_path, "nodes.csv", "id,label,f0\n0,0,1\n")
    _write(tmp_path, "edges.csv", "src,dst\n0,5\n")
    with pytest.raises(ShapeError):
        load_graph(tmp_path)
    with pytest.raises(ConfigError):
        load_graph(tmp_path, format="graphml")


def test_webkb_layout(tmp_path):
    _write(
        tmp_path,
        "out1_node_feature_label.txt",
        "node_id\tfeature\tlabel\n0\t1,0,0\t2\n1\t0,1,0\t4\n2\t0,0,1\t2\n",
    )
    _write(tmp_path, "out1_graph_edges.txt", "node_id\tnode_id\n0\t1\n1\t2\n1\t0\n")
    g = load_graph(tmp_path, format="webkb")
    assert g.n_nodes == 3 and g.n_features == 3 and g.n_edges == 2
    assert g.labels.tolist() == [0, 1, 0]


def test_planetoid_layout(tmp_path):
    rng = np.random.default_rng(0)
    n_train, n_test, d, C = 4, 2, 5, 3
    X = (rng.random((n_train + n_test, d)) < 0.5).astype(float)
    y = np.eye(C)[[0, 1, 2, 0, 1, 2]]
    test_idx = np.array([5, 4])
    objs = {
        "x": sp.csr_matrix(X[:2]),
        "y": y[:2],
        "allx": sp.csr_matrix(X[:n_train]),
        "ally": y[:n_train],
        "tx": sp.csr_matrix(X[[4, 5]]),
        "ty": y[[4, 5]],
        "graph": {0: [1], 1: [0, 2], 2: [1], 3: [5], 4: [], 5: [3]},
    }
    for k, v in objs.items():
        with open(tmp_path / f"ind.toy.{k}", "wb") as fh:
            pickle.dump(v, fh)
    np.savetxt(tmp_path / "ind.toy.test.index", test_idx, fmt="%d")
    g = load_graph(tmp_path, format="planetoid")
    assert g.n_nodes == 6 and g.n_edges == 3
    # rows at positions test_idx are reordered as in the reference loader
    np.testing.assert_array_equal(g.features[:4], X[:4])
    np.testing.assert_array_equal(g.features[[5, 4]], X[[4, 5]])


def test_write_edges_counts_diagonal(tmp_path):
    M = np.array([[1, 1, 0], [1, 0, 0], [0, 0, 1]], dtype=float)
    n = write_edges_csv(tmp_path / "e.csv", M)
    assert n == 3
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines == ["src,dst", "0,0", "0,1", "2,2"]
