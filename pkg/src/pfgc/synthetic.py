"""Small attributed benchmark graphs with planted clusters."""

from __future__ import annotations

import numpy as np

from .graph import AttributedGraph


def attributed_sbm(
    n_nodes: int = 90,
    n_clusters: int = 3,
    p_in: float = 0.1,
    p_out: float = 0.02,
    n_features: int = 60,
    signal: float = 0.3,
    noise: float = 0.05,
    seed: int = 0,
) -> AttributedGraph:
    """Balanced block model with sparse binary bag-of-words style features.

    Each cluster owns a random subset of "topic" columns switched on with
    probability ``signal``; every other column is on with probability ``noise``.
    Setting ``p_in < p_out`` gives a heterophilic graph whose features still
    carry the cluster structure.
    """
    rng = np.random.default_rng(seed)
    z = np.arange(n_nodes) % n_clusters
    prob = np.where(z[:, None] == z[None, :], p_in, p_out)
    A = np.triu(rng.random((n_nodes, n_nodes)) < prob, 1).astype(np.float64)
    A = A + A.T

    topics = rng.integers(n_clusters, size=n_features)
    on = np.where(topics[None, :] == z[:, None], signal, noise)
    X = (rng.random((n_nodes, n_features)) < on).astype(np.float64)
    empty = X.sum(axis=1) == 0
    X[empty, rng.integers(n_features, size=int(empty.sum()))] = 1.0
    return AttributedGraph(X, A, z.astype(np.int64), n_clusters, name=f"asbm-{seed}")
