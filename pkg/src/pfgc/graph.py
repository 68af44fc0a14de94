"""Attributed graphs, normalized operators and homophily statistics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ShapeError, UsageError


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AttributedGraph:
    """Undirected graph with node features and optional ground-truth labels.

    Arrays are copied and made read-only on construction.

    Parameters
    ----------
    features : (N, d) array
        Node feature matrix ``X``. Must be finite.
    adjacency : (N, N) array
        Symmetric binary adjacency ``A`` without self-loops.
    labels : (N,) int array, optional
        Cluster ids in ``[0, C)``, each id used at least once.
    n_clusters : int, optional
        Number of clusters ``C``. Inferred from ``labels`` when omitted.
    name : str
        Free-form identifier used in reports.
    """

    features: np.ndarray
    adjacency: np.ndarray
    labels: np.ndarray | None = None
    n_clusters: int | None = None
    name: str = field(default="graph", compare=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        A = np.asarray(self.adjacency, dtype=np.float64)
        if X.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {X.shape}")
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ShapeError(f"adjacency must be square, got shape {A.shape}")
        if A.shape[0] != X.shape[0]:
            raise ShapeError(
                f"adjacency has {A.shape[0]} nodes but features have {X.shape[0]} rows"
            )
        if not np.all(np.isfinite(X)):
            raise DataError("features contain non-finite entries")
        if not np.array_equal(A, A.T):
            raise DataError("adjacency is not symmetric")
        if np.any(np.diag(A) != 0):
            raise DataError("adjacency has self-loops")
        if not np.all((A == 0) | (A == 1)):
            raise DataError("adjacency must be binary")

        C = self.n_clusters
        y = self.labels
        if y is not None:
            y = np.asarray(y)
            if y.shape != (X.shape[0],):
                raise ShapeError(f"labels must have shape ({X.shape[0]},), got {y.shape}")
            if not np.issubdtype(y.dtype, np.integer):
                raise DataError("labels must be integers")
            y = y.astype(np.int64)
            present = np.unique(y)
            if C is None:
                C = int(present.size)
            if present[0] < 0 or present[-1] >= C or present.size != C:
                raise DataError(f"labels must use every value in [0, {C}) at least once")
            object.__setattr__(self, "labels", _frozen(y))
        if C is not None:
            C = int(C)
            if C < 1:
                raise DataError("n_clusters must be positive")
        object.__setattr__(self, "n_clusters", C)
        object.__setattr__(self, "features", _frozen(X))
        object.__setattr__(self, "adjacency", _frozen(A))

    @property
    def n_nodes(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return int(np.count_nonzero(np.triu(self.adjacency, 1)))

    @property
    def has_labels(self) -> bool:
        return self.labels is not None

    def edge_list(self) -> np.ndarray:
        """Undirected edges as an ``(E, 2)`` array with ``i < j``, row-major order."""
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return np.stack([i, j], axis=1)


@dataclass(frozen=True)
class NormalizedOperators:
    """Renormalized adjacency and the matching Laplacian ``L = I - adj_norm``."""

    adj_norm: np.ndarray
    laplacian: np.ndarray


def normalize(adjacency) -> NormalizedOperators:
    """Symmetric renormalization ``D^-1/2 (A + I) D^-1/2`` with ``D`` the degree of ``A + I``.

    Using the degree of ``A + I`` keeps the Laplacian spectrum inside ``[0, 2)``
    and leaves no zero degrees, so isolated nodes need no special case.
    """
    A = np.asarray(adjacency, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"adjacency must be square, got shape {A.shape}")
    n = A.shape[0]
    A_hat = A + np.eye(n)
    d_inv_sqrt = 1.0 / np.sqrt(A_hat.sum(axis=1))
    adj_norm = d_inv_sqrt[:, None] * A_hat * d_inv_sqrt[None, :]
    laplacian = np.eye(n) - adj_norm
    return NormalizedOperators(adj_norm=adj_norm, laplacian=laplacian)


def _resolve(graph, labels):
    if isinstance(graph, AttributedGraph):
        A = graph.adjacency
        if labels is None:
            labels = graph.labels
    else:
        A = np.asarray(graph, dtype=np.float64)
    if labels is None:
        raise UsageError("labels are required")
    labels = np.asarray(labels)
    if labels.shape != (A.shape[0],):
        raise ShapeError("labels do not match the number of nodes")
    return A, labels


def homophily_ratio(graph, labels=None) -> float:
    """Node homophily: mean fraction of same-label neighbours.

    ``graph`` is an :class:`AttributedGraph` or a square adjacency matrix (then
    ``labels`` is required). Self-loops are not counted as neighbours and nodes
    without neighbours are left out of the mean. Returns ``nan`` when every node
    is isolated.
    """
    A, y = _resolve(graph, labels)
    A = (A != 0).astype(np.float64)
    np.fill_diagonal(A, 0.0)
    deg = A.sum(axis=1)
    same = (A * (y[:, None] == y[None, :])).sum(axis=1)
    mask = deg > 0
    if not np.any(mask):
        return float("nan")
    return float(np.mean(same[mask] / deg[mask]))


def edge_homophily(graph, labels=None) -> float:
    """Fraction of undirected edges joining same-label nodes."""
    A, y = _resolve(graph, labels)
    i, j = np.nonzero(np.triu(A != 0, 1))
    if i.size == 0:
        return float("nan")
    return float(np.mean(y[i] == y[j]))


@dataclass(frozen=True)
class CommonalityReport:
    """Per-edge neighbour-overlap verdicts scored against ground truth.

    ``*_recall`` is the fraction of truly homophilic (heterophilic) edges given
    the matching verdict; ``*_precision`` is the fraction of edges given a
    verdict that truly belong to that class.
    """

    edges: np.ndarray
    jaccard: np.ndarray
    predicted_homophilic: np.ndarray
    truly_homophilic: np.ndarray
    homophilic_recall: float
    heterophilic_recall: float
    homophilic_precision: float
    heterophilic_precision: float

    def rows(self) -> list[dict]:
        pred, true = self.predicted_homophilic, self.truly_homophilic
        return [
            {
                "edge_class": "homophilic",
                "n_edges": int(true.sum()),
                "n_predicted": int(pred.sum()),
                "n_correct": int((pred & true).sum()),
                "proportion_correct": self.homophilic_recall,
                "precision": self.homophilic_precision,
            },
            {
                "edge_class": "heterophilic",
                "n_edges": int((~true).sum()),
                "n_predicted": int((~pred).sum()),
                "n_correct": int((~pred & ~true).sum()),
                "proportion_correct": self.heterophilic_recall,
                "precision": self.heterophilic_precision,
            },
        ]


def _safe_ratio(num, den) -> float:
    return float(num) / float(den) if den else float("nan")


def neighbor_jaccard(adjacency, edges=None) -> np.ndarray:
    """Jaccard overlap of open neighbourhoods for each edge ``(i, j)``."""
    A = (np.asarray(adjacency) != 0).astype(np.float64)
    np.fill_diagonal(A, 0.0)
    if edges is None:
        edges = np.stack(np.nonzero(np.triu(A, 1)), axis=1)
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    i, j = edges[:, 0], edges[:, 1]
    inter = np.einsum("ek,ek->e", A[i], A[j])
    deg = A.sum(axis=1)
    union = deg[i] + deg[j] - inter
    out = np.zeros(edges.shape[0])
    np.divide(inter, union, out=out, where=union > 0)
    return out


def classify_edges_by_commonality(graph: AttributedGraph, threshold: float = 0.5) -> CommonalityReport:
    """Call an edge homophilic when its endpoints share at least ``threshold`` of their neighbours."""
    if not graph.has_labels:
        raise UsageError("classify_edges_by_commonality needs ground-truth labels")
    edges = graph.edge_list()
    jac = neighbor_jaccard(graph.adjacency, edges)
    pred = jac >= threshold
    y = graph.labels
    true = y[edges[:, 0]] == y[edges[:, 1]]
    return CommonalityReport(
        edges=edges,
        jaccard=jac,
        predicted_homophilic=pred,
        truly_homophilic=true,
        homophilic_recall=_safe_ratio((pred & true).sum(), true.sum()),
        heterophilic_recall=_safe_ratio((~pred & ~true).sum(), (~true).sum()),
        homophilic_precision=_safe_ratio((pred & true).sum(), pred.sum()),
        heterophilic_precision=_safe_ratio((~pred & ~true).sum(), (~pred).sum()),
    )
