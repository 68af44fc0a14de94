"""Dataset ingestion and edge-list output.

Three on-disk layouts are understood:

``canonical_csv``
    ``nodes.csv`` with header ``id,label,f0,...`` (label ``-1`` when unknown)
    and ``edges.csv`` with header ``src,dst``.
``webkb``
    The Geom-GCN layout used for Cornell/Texas/Wisconsin/Washington:
    ``out1_node_feature_label.txt`` (``id<TAB>f0,f1,...<TAB>label``) and
    ``out1_graph_edges.txt`` (``src<TAB>dst``), each with a header line.
``planetoid``
    The pickled ``ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}`` files
    (Cora, CiteSeer, PubMed).

All loaders symmetrize the adjacency, drop self-loops and duplicate edges,
and remap labels onto ``0..C-1``.
"""

from __future__ import annotations

import csv
import pickle
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, LoadError, ShapeError
from .graph import AttributedGraph

FORMATS = ("canonical_csv", "webkb", "planetoid")

WEBKB_FEATURES = "out1_node_feature_label.txt"
WEBKB_EDGES = "out1_graph_edges.txt"


def _require(path: Path) -> Path:
    if not path.is_file():
        raise LoadError(f"missing file: {path}")
    return path


def _edges_to_adjacency(src, dst, n: int) -> np.ndarray:
    src = np.asarray(src, dtype=np.int64)
    dst = np.asarray(dst, dtype=np.int64)
    if src.size and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
        raise ShapeError(f"edge endpoint outside [0, {n})")
    A = np.zeros((n, n))
    A[src, dst] = 1.0
    A = np.maximum(A, A.T)
    np.fill_diagonal(A, 0.0)
    return A


def _remap_labels(raw) -> tuple[np.ndarray | None, int | None]:
    raw = np.asarray(raw, dtype=np.int64)
    if raw.size == 0 or np.all(raw < 0):
        return None, None
    if np.any(raw < 0):
        raise DataError("partially labelled datasets are not supported")
    uniq, inv = np.unique(raw, return_inverse=True)
    return inv.astype(np.int64), int(uniq.size)


def _check_features(X: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(X)):
        raise DataError("features contain NaN or infinite values")
    return X


def load_canonical_csv(path) -> AttributedGraph:
    path = Path(path)
    nodes_file = _require(path / "nodes.csv")
    edges_file = _require(path / "edges.csv")

    with open(nodes_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["id", "label"]:
            raise DataError(f"{nodes_file}: header must start with 'id,label'")
        rows = [r for r in reader if r]
    n = len(rows)
    d = len(header) - 2
    ids = np.empty(n, dtype=np.int64)
    raw_labels = np.empty(n, dtype=np.int64)
    X = np.empty((n, d))
    try:
        for k, r in enumerate(rows):
            if len(r) != d + 2:
                raise DataError(f"{nodes_file}: row {k + 2} has {len(r)} fields, expected {d + 2}")
            ids[k] = int(r[0])
            raw_labels[k] = int(r[1])
            X[k] = [float(v) for v in r[2:]]
    except ValueError as exc:
        raise DataError(f"{nodes_file}: {exc}") from exc
    order = np.argsort(ids, kind="stable")
    if not np.array_equal(ids[order], np.arange(n)):
        raise DataError(f"{nodes_file}: ids must be the dense range 0..{n - 1}")
    X = _check_features(X[order])
    labels, C = _remap_labels(raw_labels[order])

    with open(edges_file, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is not None and header != ["src", "dst"]:
            raise DataError(f"{edges_file}: header must be 'src,dst'")
        try:
            pairs = [(int(r[0]), int(r[1])) for r in reader if r]
        except (ValueError, IndexError) as exc:
            raise DataError(f"{edges_file}: {exc}") from exc
    src = [p[0] for p in pairs]
    dst = [p[1] for p in pairs]
    A = _edges_to_adjacency(src, dst, n)
    return AttributedGraph(X, A, labels, C, name=path.name)


def load_webkb(path) -> AttributedGraph:
    path = Path(path)
    feat_file = _require(path / WEBKB_FEATURES)
    edge_file = _require(path / WEBKB_EDGES)

    ids, feats, raw_labels = [], [], []
    with open(feat_file, encoding="utf-8") as fh:
        next(fh, None)
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{feat_file}:{lineno}: expected 3 tab-separated fields")
            try:
                ids.append(int(parts[0]))
                feats.append([float(v) for v in parts[1].split(",")])
                raw_labels.append(int(parts[2]))
            except ValueError as exc:
                raise DataError(f"{feat_file}:{lineno}: {exc}") from exc
    n = len(ids)
    widths = {len(f) for f in feats}
    if len(widths) > 1:
        raise ShapeError(f"{feat_file}: rows have differing feature counts {sorted(widths)}")
    ids = np.asarray(ids)
    order = np.argsort(ids, kind="stable")
    if not np.array_equal(ids[order], np.arange(n)):
        raise DataError(f"{feat_file}: node ids must be the dense range 0..{n - 1}")
    X = _check_features(np.asarray(feats, dtype=np.float64)[order])
    labels, C = _remap_labels(np.asarray(raw_labels)[order])

    src, dst = [], []
    with open(edge_file, encoding="utf-8") as fh:
        next(fh, None)
        for lineno, line in enumerate(fh, start=2):
            parts = line.split()
            if not parts:
                continue
            try:
                src.append(int(parts[0]))
                dst.append(int(parts[1]))
            except (ValueError, IndexError) as exc:
                raise DataError(f"{edge_file}:{lineno}: {exc}") from exc
    A = _edges_to_adjacency(src, dst, n)
    return AttributedGraph(X, A, labels, C, name=path.name)


def _unpickle(path: Path):
    with open(path, "rb") as fh:
        return pickle.load(fh, encoding="latin1")


def _dense(m) -> np.ndarray:
    return np.asarray(m.todense() if hasattr(m, "todense") else m, dtype=np.float64)


def load_planetoid(path, name: str | None = None) -> AttributedGraph:
    """Load the Planetoid split files.

    The files are Python pickles; only load datasets from trusted sources.
    """
    path = Path(path)
    if name is None:
        found = sorted(path.glob("ind.*.graph"))
        if not found:
            raise LoadError(f"no ind.<name>.graph file in {path}")
        name = found[0].name.split(".")[1]
    parts = {}
    for key in ("x", "y", "tx", "ty", "allx", "ally", "graph"):
        parts[key] = _unpickle(_require(path / f"ind.{name}.{key}"))
    idx_file = _require(path / f"ind.{name}.test.index")
    test_idx = np.loadtxt(idx_file, dtype=np.int64, ndmin=1)
    test_sorted = np.sort(test_idx)

    tx, ty = _dense(parts["tx"]), np.asarray(parts["ty"], dtype=np.float64)
    if name == "citeseer":
        # isolated test nodes are missing from tx/ty; pad with zero rows
        full = np.arange(test_sorted.min(), test_sorted.max() + 1)
        tx_ext = np.zeros((full.size, tx.shape[1]))
        tx_ext[test_sorted - test_sorted.min()] = tx
        ty_ext = np.zeros((full.size, ty.shape[1]))
        ty_ext[test_sorted - test_sorted.min()] = ty
        tx, ty, test_sorted = tx_ext, ty_ext, full

    X = np.vstack([_dense(parts["allx"]), tx])
    Y = np.vstack([np.asarray(parts["ally"], dtype=np.float64), ty])
    X[test_idx] = X[test_sorted]
    Y[test_idx] = Y[test_sorted]
    n = X.shape[0]
    X = _check_features(X)

    graph = parts["graph"]
    src, dst = [], []
    for u, nbrs in graph.items():
        for v in nbrs:
            if u < n and v < n:
                src.append(u)
                dst.append(v)
    A = _edges_to_adjacency(src, dst, n)
    labels, C = _remap_labels(Y.argmax(axis=1))
    return AttributedGraph(X, A, labels, C, name=name)


def load_graph(path, format: str = "canonical_csv", n_clusters: int | None = None) -> AttributedGraph:
    """Load a dataset directory in one of :data:`FORMATS`.

    ``n_clusters`` is only needed for unlabelled data.
    """
    path = Path(path)
    if not path.is_dir():
        raise LoadError(f"dataset directory not found: {path}")
    loaders = {
        "canonical_csv": load_canonical_csv,
        "webkb": load_webkb,
        "planetoid": load_planetoid,
    }
    if format not in loaders:
        raise ConfigError(f"unknown dataset format {format!r}; expected one of {FORMATS}")
    g = loaders[format](path)
    if n_clusters is not None and g.n_clusters is None:
        g = AttributedGraph(g.features, g.adjacency, None, n_clusters, name=g.name)
    return g


def write_edges_csv(path, adjacency) -> int:
    """Write the upper triangle (diagonal included) of ``adjacency`` as ``src,dst`` rows."""
    A = np.asarray(adjacency)
    i, j = np.nonzero(np.triu(A != 0))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst"])
        w.writerows(zip(i.tolist(), j.tolist()))
    return int(i.size)


def write_canonical_csv(graph: AttributedGraph, path) -> None:
    """Write ``graph`` as a canonical CSV dataset directory."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    labels = graph.labels if graph.has_labels else np.full(graph.n_nodes, -1)
    with open(path / "nodes.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label"] + [f"f{k}" for k in range(graph.n_features)])
        for i in range(graph.n_nodes):
            w.writerow([i, int(labels[i])] + [repr(float(v)) for v in graph.features[i]])
    write_edges_csv(path / "edges.csv", np.triu(graph.adjacency, 1))
