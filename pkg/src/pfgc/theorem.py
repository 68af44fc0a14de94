"""Numerical laboratory for the filter-discriminativeness theorem.

The claim under test: on a balanced graph with homophily ``r``,

* with ``r > 1/C`` the global low-pass filter h1 separates clusters better
  than the local low-pass h2;
* with ``r < 1/C`` the local high-pass h4 separates them better than the
  global high-pass h3;

where "better" means a larger expected gap between the average inter-cluster
and intra-cluster squared distance of filtered random signals, measured over
edges. In closed form the gap is::

    E[S(a) - S(b)] = 2C / ((C - 1) N^2) * E[dd] * (1 - C r),
    E[dd]          = sum_t lambda_t (h_a(lambda_t)^2 - h_b(lambda_t)^2) / N

Edge distances are taken on the degree-normalized signal ``D^{-1/2} x``, so
the sum over edges equals the Laplacian quadratic form exactly. Local filters
use the measured largest eigenvalue here.
"""

from __future__ import annotations

import csv
import logging
import re
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError, UsageError
from .graph import AttributedGraph, homophily_ratio, normalize
from .spectral import EigenCache, FilterKind, SpectralBasis, eig_sym, filter_response

logger = logging.getLogger(__name__)

PAIRS = {
    "h1_vs_h2": (FilterKind.GLOBAL_LOW_PASS, FilterKind.LOCAL_LOW_PASS),
    "h3_vs_h4": (FilterKind.GLOBAL_HIGH_PASS, FilterKind.LOCAL_HIGH_PASS),
}
INCONCLUSIVE_BAND = 0.05
DEFAULT_MEAN_DEGREE = 10.0


@dataclass(frozen=True)
class SbmConfig:
    n_nodes: int
    n_clusters: int
    p_in: float
    p_out: float
    seed: int = 0

    def __post_init__(self):
        if self.n_clusters < 1 or self.n_nodes < self.n_clusters or self.n_nodes % self.n_clusters:
            raise ConfigError(f"n_nodes={self.n_nodes} must be a positive multiple of n_clusters={self.n_clusters}")
        for name in ("p_in", "p_out"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name}={p} outside [0, 1]")

    @classmethod
    def from_homophily(cls, n_nodes: int, n_clusters: int, r: float, mean_degree: float = DEFAULT_MEAN_DEGREE, seed: int = 0) -> "SbmConfig":
        """Edge probabilities giving expected degree ``mean_degree`` with a fraction ``r`` of it intra-block."""
        if not 0.0 <= r <= 1.0:
            raise ConfigError(f"target homophily {r} outside [0, 1]")
        block = n_nodes // n_clusters
        p_in = r * mean_degree / (block - 1) if block > 1 else 0.0
        p_out = (1.0 - r) * mean_degree / (n_nodes - block) if n_nodes > block else 0.0
        return cls(n_nodes, n_clusters, min(p_in, 1.0), min(p_out, 1.0), seed)

    def expected_homophily(self) -> float:
        block = self.n_nodes // self.n_clusters
        a = self.p_in * (block - 1)
        b = self.p_out * (self.n_nodes - block)
        return a / (a + b) if a + b > 0 else float("nan")


def sbm_generate(config: SbmConfig) -> AttributedGraph:
    """Balanced stochastic block model; features are a constant column."""
    rng = np.random.default_rng(config.seed)
    N, C = config.n_nodes, config.n_clusters
    z = np.repeat(np.arange(C), N // C)
    prob = np.where(z[:, None] == z[None, :], config.p_in, config.p_out)
    A = np.triu(rng.random((N, N)) < prob, 1).astype(np.float64)
    A = A + A.T
    return AttributedGraph(np.ones((N, 1)), A, z, C, name=f"sbm-{N}-{C}-{config.seed}")


def laplacian_basis(graph: AttributedGraph, cache: EigenCache | None = None) -> SpectralBasis:
    return eig_sym(normalize(graph.adjacency).laplacian, cache)


def _pair(pair: str):
    if pair not in PAIRS:
        raise UsageError(f"unknown filter pair {pair!r}; expected one of {sorted(PAIRS)}")
    return PAIRS[pair]


def pair_responses(basis: SpectralBasis, pair: str) -> tuple[np.ndarray, np.ndarray]:
    """Responses of the two filters in ``pair``, local ones scaled by the measured largest eigenvalue."""
    ka, kb = _pair(pair)
    lam_n = basis.lambda_max
    return filter_response(ka, basis, lam_n), filter_response(kb, basis, lam_n)


def expected_edge_gap(basis: SpectralBasis, pair: str) -> float:
    """``sum_t lambda_t (h_a^2 - h_b^2) E[a_t^2]`` with ``E[a_t^2] = 1/N``."""
    ha, hb = pair_responses(basis, pair)
    lam = basis.eigvals
    return float(np.sum(lam * (ha * ha - hb * hb)) / basis.n)


def identity_gap(edge_gap: float, n_nodes: int, n_clusters: int, r: float) -> float:
    """Closed-form expected cluster gap ``2C/((C-1)N^2) * E[dd] * (1 - C r)``."""
    C, N = n_clusters, n_nodes
    if C < 2:
        return 0.0
    return 2.0 * C / ((C - 1) * N * N) * edge_gap * (1.0 - C * r)


def random_unit_coefficients(n_trials: int, n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((n_trials, n))
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def filtered_signals(basis: SpectralBasis, response: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Rows ``x_bar = U (h * a)`` for each coefficient row ``a``."""
    return (coeffs * response) @ basis.eigvecs.T


def _edge_split(graph: AttributedGraph):
    i, j = np.nonzero(np.triu(graph.adjacency, 1))
    intra = graph.labels[i] == graph.labels[j]
    scale = 1.0 / np.sqrt(graph.adjacency.sum(axis=1) + 1.0)
    return i, j, intra, scale


def edge_distance_totals(graph: AttributedGraph, signals) -> tuple[np.ndarray, np.ndarray]:
    """Intra- and inter-cluster sums of ``(y_i - y_j)^2`` over edges, ``y = D^{-1/2} x``.

    ``signals`` may be one vector (N,) or a stack (T, N); results follow suit.
    """
    if not graph.has_labels:
        raise UsageError("cluster labels are required")
    i, j, intra, scale = _edge_split(graph)
    x = np.asarray(signals, dtype=np.float64)
    y = x * scale
    d = (y[..., i] - y[..., j]) ** 2
    return d[..., intra].sum(axis=-1), d[..., ~intra].sum(axis=-1)


def cluster_gap(graph: AttributedGraph, signals) -> np.ndarray:
    """Average inter-cluster minus average intra-cluster distance, per signal."""
    N, C = graph.n_nodes, graph.n_clusters
    s_in, s_out = edge_distance_totals(graph, signals)
    intra_pairs = N * N / (2.0 * C)
    inter_pairs = N * N * (C - 1) / (2.0 * C)
    return s_out / inter_pairs - s_in / intra_pairs


@dataclass(frozen=True)
class McGap:
    mean: float
    stderr: float
    n_trials: int


def mc_cluster_gap(graph: AttributedGraph, basis: SpectralBasis, pair: str, n_trials: int, seed: int = 0) -> McGap:
    """Monte-Carlo estimate of ``E[S(a) - S(b)]`` with shared random signals for both filters."""
    if n_trials < 2:
        raise UsageError("n_trials must be at least 2 to estimate a standard error")
    if graph.n_clusters is None or graph.n_clusters < 2:
        raise UsageError("at least two clusters are required")
    ha, hb = pair_responses(basis, pair)
    coeffs = random_unit_coefficients(n_trials, basis.n, np.random.default_rng(seed))
    diff = cluster_gap(graph, filtered_signals(basis, ha, coeffs)) - cluster_gap(
        graph, filtered_signals(basis, hb, coeffs)
    )
    return McGap(float(diff.mean()), float(diff.std(ddof=1) / np.sqrt(n_trials)), n_trials)


@dataclass(frozen=True)
class DiscriminativenessReport:
    pair: str
    r: float
    n_nodes: int
    n_clusters: int
    edge_gap: float
    analytic_gap: float
    mc_gap_mean: float
    mc_gap_stderr: float
    n_trials: int
    lambda_min: float
    lambda_max: float
    in_premise: bool
    verdict: str

    @property
    def identity_z(self) -> float:
        if self.mc_gap_stderr == 0:
            return 0.0 if self.mc_gap_mean == self.analytic_gap else float("inf")
        return (self.mc_gap_mean - self.analytic_gap) / self.mc_gap_stderr

    def to_dict(self) -> dict:
        d = asdict(self)
        d["identity_z"] = self.identity_z
        return d


def theorem_verdict(pair: str, r: float, n_clusters: int, mean: float, stderr: float, predicted: float) -> tuple[str, bool]:
    """``(verdict, in_premise)``.

    Inside the theorem's premise the expected sign is the theorem's
    conclusion; outside it is the sign of the closed-form prediction.
    """
    _pair(pair)
    c_r = n_clusters * r
    if pair == "h1_vs_h2":
        in_premise = c_r > 1.0
        expected = 1.0
    else:
        in_premise = c_r < 1.0
        expected = -1.0
    if not in_premise:
        expected = float(np.sign(predicted))
    if abs(1.0 - c_r) < INCONCLUSIVE_BAND or abs(mean) <= 2.0 * stderr or expected == 0.0:
        return "INCONCLUSIVE", in_premise
    return ("PASS" if np.sign(mean) == expected else "FAIL"), in_premise


def verify_theorem(sweep, pairs=tuple(PAIRS), n_trials: int = 200, seed: int = 0, cache: EigenCache | None = None) -> list:
    """One :class:`DiscriminativenessReport` per (configuration, pair)."""
    cache = cache or EigenCache()
    reports = []
    for k, cfg in enumerate(sweep):
        graph = sbm_generate(cfg)
        basis = laplacian_basis(graph, cache)
        r = homophily_ratio(graph)
        if basis.lambda_min > 1e-8:
            logger.info("config %d: smallest eigenvalue %.3g is not ~0", k, basis.lambda_min)
        for p, pair in enumerate(pairs):
            edge_gap = expected_edge_gap(basis, pair)
            predicted = identity_gap(edge_gap, graph.n_nodes, graph.n_clusters, r)
            mc = mc_cluster_gap(graph, basis, pair, n_trials, seed=int(np.random.SeedSequence([seed, k, p]).generate_state(1)[0]))
            verdict, in_premise = theorem_verdict(pair, r, graph.n_clusters, mc.mean, mc.stderr, predicted)
            reports.append(
                DiscriminativenessReport(
                    pair=pair,
                    r=r,
                    n_nodes=graph.n_nodes,
                    n_clusters=graph.n_clusters,
                    edge_gap=edge_gap,
                    analytic_gap=predicted,
                    mc_gap_mean=mc.mean,
                    mc_gap_stderr=mc.stderr,
                    n_trials=n_trials,
                    lambda_min=basis.lambda_min,
                    lambda_max=basis.lambda_max,
                    in_premise=in_premise,
                    verdict=verdict,
                )
            )
    return reports


_SWEEP_RE = re.compile(r"^\s*r\s*=\s*(.+)$")


def parse_sweep(text: str) -> list:
    """Parse ``r=start:stop:step`` (stop inclusive) or ``r=a,b,c`` into homophily targets."""
    m = _SWEEP_RE.match(text or "")
    if not m:
        raise ConfigError(f"sweep must look like 'r=0.05:0.95:0.1' or 'r=0.1,0.5', got {text!r}")
    body = m.group(1)
    try:
        if ":" in body:
            start, stop, step = (float(v) for v in body.split(":"))
            if step <= 0 or stop < start:
                raise ValueError("need step > 0 and stop >= start")
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            values = [round(start + i * step, 12) for i in range(count)]
        else:
            values = [float(v) for v in body.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad sweep {text!r}: {exc}") from exc
    if not values or any(not 0.0 <= v <= 1.0 for v in values):
        raise ConfigError(f"sweep values must lie in [0, 1]: {text!r}")
    return values


def sweep_configs(n_nodes: int, n_clusters: int, targets, mean_degree: float = DEFAULT_MEAN_DEGREE, seed: int = 0) -> list:
    return [SbmConfig.from_homophily(n_nodes, n_clusters, r, mean_degree, seed + k) for k, r in enumerate(targets)]


REPORT_COLUMNS = ("r", "pair", "analytic_gap", "mc_mean", "mc_stderr", "verdict")
EXTRA_COLUMNS = ("n_trials", "edge_gap", "lambda_min", "lambda_max", "in_premise", "identity_z")


def write_theorem_csv(path, reports) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS + EXTRA_COLUMNS)
        for rep in reports:
            w.writerow(
                [
                    repr(rep.r),
                    rep.pair,
                    repr(rep.analytic_gap),
                    repr(rep.mc_gap_mean),
                    repr(rep.mc_gap_stderr),
                    rep.verdict,
                    rep.n_trials,
                    repr(rep.edge_gap),
                    repr(rep.lambda_min),
                    repr(rep.lambda_max),
                    int(rep.in_premise),
                    repr(rep.identity_z),
                ]
            )
