"""K-means, clustering metrics and the attention-masking analysis."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import UsageError

BANDS = ("top_third", "mid_third", "bottom_third", "none")


@dataclass
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    inertia: float
    n_iter: int
    inertia_history: list = field(default_factory=list)


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d = (
        np.sum(points * points, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers * centers, axis=1)[None, :]
    )
    return np.maximum(d, 0.0)


def _kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _sq_dists(points, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = rng.choice(n, p=closest / total)
        else:
            idx = rng.integers(n)
        centers[j] = points[idx]
        closest = np.minimum(closest, _sq_dists(points, centers[j : j + 1])[:, 0])
    return centers


def _lloyd(points, centers, max_iter, tol) -> KMeansResult:
    history = []
    labels = None
    for it in range(1, max_iter + 1):
        d = _sq_dists(points, centers)
        labels = np.argmin(d, axis=1)
        cost = d[np.arange(points.shape[0]), labels]
        history.append(float(cost.sum()))
        new = centers.copy()
        counts = np.bincount(labels, minlength=centers.shape[0])
        for j in range(centers.shape[0]):
            if counts[j]:
                new[j] = points[labels == j].mean(axis=0)
            else:
                far = int(np.argmax(cost))
                new[j] = points[far]
                cost[far] = 0.0
        shift = float(np.max(np.sum((new - centers) ** 2, axis=1)))
        centers = new
        if shift <= tol:
            break
    d = _sq_dists(points, centers)
    labels = np.argmin(d, axis=1)
    inertia = float(d[np.arange(points.shape[0]), labels].sum())
    history.append(inertia)
    return KMeansResult(centers, labels.astype(np.int64), inertia, it, history)


def kmeans(points, n_clusters: int, seed: int = 0, restarts: int = 10, max_iter: int = 300, tol: float = 1e-12) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding; the restart with lowest inertia wins.

    Each restart draws from its own generator spawned from ``seed``, so the
    result does not depend on the order restarts are evaluated in. Clusters
    that empty out are re-seeded at the point currently worst served.
    """
    X = np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    if n_clusters < 1 or n_clusters > n:
        raise UsageError(f"cannot form {n_clusters} clusters from {n} points")
    if restarts < 1:
        raise UsageError("restarts must be >= 1")
    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        res = _lloyd(X, _kmeans_pp(X, n_clusters, rng), max_iter, tol)
        if best is None or res.inertia < best.inertia:
            best = res
    return best


@dataclass(frozen=True)
class ClusterMetrics:
    acc: float
    nmi: float
    matched_permutation: dict

    def to_dict(self) -> dict:
        return {"acc": self.acc, "nmi": self.nmi}


def _check_pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    pred = np.asarray(pred).ravel()
    truth = np.asarray(truth).ravel()
    if pred.shape != truth.shape:
        raise UsageError(f"label vectors differ in length ({pred.size} vs {truth.size})")
    if pred.size == 0:
        raise UsageError("empty label vectors")
    return pred, truth


def _contingency(pred, truth):
    p_vals, p_idx = np.unique(pred, return_inverse=True)
    t_vals, t_idx = np.unique(truth, return_inverse=True)
    table = np.zeros((p_vals.size, t_vals.size))
    np.add.at(table, (p_idx, t_idx), 1.0)
    return table, p_vals, t_vals


def best_matching(pred, truth) -> dict:
    """Predicted label -> true label map maximizing agreement (Hungarian)."""
    pred, truth = _check_pair(pred, truth)
    table, p_vals, t_vals = _contingency(pred, truth)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return {int(p_vals[r]): int(t_vals[c]) for r, c in zip(rows, cols)}


def accuracy(pred, truth) -> float:
    """Fraction of nodes whose predicted cluster maps to their true class under the best one-to-one map."""
    pred, truth = _check_pair(pred, truth)
    table, _, _ = _contingency(pred, truth)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum() / pred.size)


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of the two entropies.

    When either partition is a single block the ratio is 0/0; it is then 1
    if both are single blocks and 0 otherwise.
    """
    pred, truth = _check_pair(pred, truth)
    table, _, _ = _contingency(pred, truth)
    n = table.sum()
    h_p = _entropy(table.sum(axis=1))
    h_t = _entropy(table.sum(axis=0))
    if h_p == 0.0 or h_t == 0.0:
        return 1.0 if (h_p == 0.0 and h_t == 0.0) else 0.0
    pij = table / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0)) / (n * n)
    nz = pij > 0
    mi = float(np.sum(pij[nz] * np.log(pij[nz] / outer[nz])))
    return float(min(max(mi / np.sqrt(h_p * h_t), 0.0), 1.0))


def evaluate_clustering(pred, truth) -> ClusterMetrics:
    return ClusterMetrics(accuracy(pred, truth), nmi(pred, truth), best_matching(pred, truth))


def attention_bands(weights) -> dict:
    """Split columns into thirds by descending attention weight (ties by column index)."""
    w = np.asarray(weights, dtype=np.float64).ravel()
    n = w.size
    order = np.argsort(-w, kind="stable")
    b1 = int(np.floor(n / 3 + 0.5))
    b2 = int(np.floor(2 * n / 3 + 0.5))
    return {
        "top_third": np.sort(order[:b1]),
        "mid_third": np.sort(order[b1:b2]),
        "bottom_third": np.sort(order[b2:]),
        "none": np.array([], dtype=np.int64),
    }


def mask_by_attention(Ht, weights, band: str = "none") -> np.ndarray:
    """Copy of ``Ht`` with the columns of ``band`` zeroed."""
    if band not in BANDS:
        raise UsageError(f"unknown band {band!r}; expected one of {BANDS}")
    H = np.array(Ht, dtype=np.float64, copy=True)
    w = np.asarray(weights).ravel()
    if w.size != H.shape[1]:
        raise UsageError(f"{w.size} attention weights for {H.shape[1]} feature columns")
    H[:, attention_bands(w)[band]] = 0.0
    return H


def attention_mask_experiment(Ht, weights, truth, n_clusters: int, seed: int = 0, restarts: int = 10) -> dict:
    """ACC of k-means on the embedding after masking each attention band."""
    out = {}
    for band in BANDS:
        km = kmeans(mask_by_attention(Ht, weights, band), n_clusters, seed=seed, restarts=restarts)
        out[band] = accuracy(km.labels, truth)
    return out


def write_mask_report(path, results: dict) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["band", "acc"])
        for band in BANDS:
            if band in results:
                w.writerow([band, repr(float(results[band]))])
