"""Build a homophilic graph M and a heterophilic graph G from any attributed graph.

M keeps node pairs that look alike both in feature space and in their
neighbourhoods; G links each node to the few nodes least similar to it
among those that M does not already join.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graph import AttributedGraph

DEFAULT_EPSILON = 0.01
BENCHMARK_EPSILONS = (0.001, 0.05)
DEFAULT_TOP_K = 5


@dataclass(frozen=True)
class SimilarityKernels:
    """Cosine similarity of features (``attr_sim``) and of adjacency rows (``topo_sim``)."""

    attr_sim: np.ndarray
    topo_sim: np.ndarray


@dataclass(frozen=True)
class RestructuredGraphs:
    homophilic: np.ndarray
    heterophilic: np.ndarray
    epsilon: float
    top_k: int
    kernels: SimilarityKernels | None = None


def cosine_similarity(rows) -> np.ndarray:
    """Pairwise cosine similarity; all-zero rows get similarity 0 with everything."""
    Z = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(Z, axis=1)
    nz = norms > 0
    Zn = np.zeros_like(Z)
    Zn[nz] = Z[nz] / norms[nz, None]
    S = Zn @ Zn.T
    S = 0.5 * (S + S.T)
    np.clip(S, -1.0, 1.0, out=S)
    idx = np.flatnonzero(nz)
    S[idx, idx] = 1.0
    return S


def similarity_kernels(graph: AttributedGraph) -> SimilarityKernels:
    return SimilarityKernels(
        attr_sim=cosine_similarity(graph.features),
        topo_sim=cosine_similarity(graph.adjacency),
    )


def build_homophilic(kernels: SimilarityKernels, epsilon: float) -> np.ndarray:
    """``M_ij = 1`` iff ``(K_ij * B_ij)**2 >= epsilon``."""
    if not epsilon > 0:
        raise ConfigError(f"epsilon must be positive, got {epsilon}")
    score = (kernels.attr_sim * kernels.topo_sim) ** 2
    M = (score >= epsilon).astype(np.float64)
    return np.maximum(M, M.T)


def build_heterophilic(kernels: SimilarityKernels, M, top_k: int = DEFAULT_TOP_K) -> np.ndarray:
    """Keep, per row, the ``top_k`` largest positive entries of ``(1 - K) * (1 - M)``.

    Ties go to the smaller column index. The kept pattern is symmetrized
    by elementwise max; the diagonal is never selected.
    """
    K = kernels.attr_sim
    n = K.shape[0]
    if top_k < 1:
        raise ConfigError(f"top_k must be at least 1, got {top_k}")
    if top_k >= n:
        raise ConfigError(f"top_k={top_k} must be smaller than the number of nodes ({n})")
    score = (1.0 - K) * (1.0 - np.asarray(M, dtype=np.float64))
    np.fill_diagonal(score, 0.0)
    # stable sort on the negated score puts equal scores in ascending column order
    order = np.argsort(-score, axis=1, kind="stable")[:, :top_k]
    rows = np.repeat(np.arange(n), top_k)
    cols = order.ravel()
    keep = score[rows, cols] > 0
    G = np.zeros((n, n))
    G[rows[keep], cols[keep]] = 1.0
    return np.maximum(G, G.T)


def restructure(
    graph: AttributedGraph,
    epsilon: float = DEFAULT_EPSILON,
    top_k: int = DEFAULT_TOP_K,
    keep_kernels: bool = False,
) -> RestructuredGraphs:
    kernels = similarity_kernels(graph)
    M = build_homophilic(kernels, epsilon)
    G = build_heterophilic(kernels, M, top_k)
    return RestructuredGraphs(
        homophilic=M,
        heterophilic=G,
        epsilon=float(epsilon),
        top_k=int(top_k),
        kernels=kernels if keep_kernels else None,
    )
