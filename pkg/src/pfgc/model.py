"""The trainable clustering network.

Pipeline per forward pass::

    H   = adaptive-filter encoder(X)           (global low-pass on M + local high-pass on G)
    H~  = squeeze-and-excitation(H)            (per-feature gates from pooled H)
    X^  = H~ @ W_dec                           (linear decoder)
    P   = Student-t soft assignment(H~, centers)

and the objective is ``L_RE + gamma1 * L_HS + gamma2 * L_CLU``.

The public loss/assignment helpers accept plain arrays and return arrays;
the trainer runs the same code on :class:`~pfgc.autodiff.Tensor` values.
"""

from __future__ import annotations

import copy
import json
import logging
import struct
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, NumericalError, ShapeError, UsageError
from .evaluation import kmeans
from .graph import AttributedGraph, normalize
from .restructure import RestructuredGraphs
from .spectral import EigenCache, FilterKind, SpectralBasis, eig_sym, filter_matrix

logger = logging.getLogger(__name__)

FILTER_COMBOS = {
    "PFGC": (FilterKind.GLOBAL_LOW_PASS, FilterKind.LOCAL_HIGH_PASS),
    "PFGC1": (FilterKind.LOCAL_LOW_PASS, FilterKind.LOCAL_HIGH_PASS),
    "PFGC2": (FilterKind.GLOBAL_LOW_PASS, FilterKind.GLOBAL_HIGH_PASS),
    "PFGC3": (FilterKind.LOCAL_LOW_PASS, FilterKind.GLOBAL_HIGH_PASS),
}

ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
_NORM_FLOOR = 1e-24


@dataclass
class ModelConfig:
    n_layers: int = 2
    hidden_dims: tuple = (256, 64)
    se_ratio: int = 4
    mu: float = 0.5
    k_order: int = 5
    beta: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    lr: float = 1e-2
    epochs: int = 200
    warmup_epochs: int = 50
    q_interval: int = 5
    seed: int = 0
    filter_combo: str = "PFGC"
    use_se: bool = True
    activation: str = "relu"
    kmeans_restarts: int = 10

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)

    def validate(self) -> "ModelConfig":
        if self.n_layers < 1 or len(self.hidden_dims) != self.n_layers:
            raise ConfigError(
                f"n_layers={self.n_layers} does not match hidden_dims={list(self.hidden_dims)}"
            )
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigError("hidden dimensions must be positive")
        if self.use_se and (self.se_ratio < 1 or self.hidden_dims[-1] % self.se_ratio):
            raise ConfigError(
                f"final hidden dim {self.hidden_dims[-1]} is not divisible by se_ratio={self.se_ratio}"
            )
        if not 0.0 <= self.mu <= 1.0:
            raise ConfigError(f"mu must lie in [0, 1], got {self.mu}")
        if self.k_order < 1:
            raise ConfigError("k_order must be >= 1")
        if not self.beta > 0:
            raise ConfigError("beta must be positive")
        if self.gamma1 < 0 or self.gamma2 < 0:
            raise ConfigError("gamma1 and gamma2 must be non-negative")
        if not self.lr > 0:
            raise ConfigError("lr must be positive")
        if self.epochs < 0 or self.warmup_epochs < 0 or self.q_interval < 1:
            raise ConfigError("epochs/warmup_epochs must be >= 0 and q_interval >= 1")
        if self.filter_combo not in FILTER_COMBOS:
            raise ConfigError(f"unknown filter_combo {self.filter_combo!r}")
        if self.activation not in ("relu", "identity"):
            raise ConfigError(f"unknown activation {self.activation!r}")
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class ModelState:
    """Learnable parameters plus Adam moments (``moments[name] = {"m", "v", "t"}``)."""

    layer_weights: list
    se_down: np.ndarray
    se_up: np.ndarray
    decoder_weights: np.ndarray
    centers: np.ndarray | None = None
    moments: dict = field(default_factory=dict)

    def parameters(self) -> dict:
        params = {f"W{l}": w for l, w in enumerate(self.layer_weights)}
        params["se_down"] = self.se_down
        params["se_up"] = self.se_up
        params["decoder"] = self.decoder_weights
        if self.centers is not None:
            params["centers"] = self.centers
        return params

    def set_parameter(self, name: str, value: np.ndarray) -> None:
        if name.startswith("W"):
            self.layer_weights[int(name[1:])] = value
        elif name == "se_down":
            self.se_down = value
        elif name == "se_up":
            self.se_up = value
        elif name == "decoder":
            self.decoder_weights = value
        elif name == "centers":
            self.centers = value
        else:
            raise KeyError(name)

    def copy(self) -> "ModelState":
        return copy.deepcopy(self)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(p)) for p in self.parameters().values())


@dataclass
class TrainReport:
    loss_re: list = field(default_factory=list)
    loss_hs: list = field(default_factory=list)
    loss_clu: list = field(default_factory=list)
    loss_total: list = field(default_factory=list)
    soft_assignment: np.ndarray | None = None
    labels: np.ndarray | None = None
    attention: np.ndarray | None = None
    embedding: np.ndarray | None = None
    p_row_sum_max_err: float = 0.0
    q_row_sum_max_err: float = 0.0
    seconds: float = 0.0

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "loss_re": self.loss_re,
            "loss_hs": self.loss_hs,
            "loss_clu": self.loss_clu,
            "loss_total": self.loss_total,
            "p_row_sum_max_err": self.p_row_sum_max_err,
            "q_row_sum_max_err": self.q_row_sum_max_err,
            "labels": None if self.labels is None else self.labels.tolist(),
            "soft_assignment": None if self.soft_assignment is None else self.soft_assignment.tolist(),
            "attention": None if self.attention is None else self.attention.ravel().tolist(),
        }
        if include_timing:
            d["seconds"] = self.seconds
        return d


class TrainingAborted(NumericalError):
    """Raised on a non-finite or diverging loss; carries the last good state."""

    def __init__(self, message, state=None, report=None):
        super().__init__(message)
        self.state = state
        self.report = report


# ---------------------------------------------------------------------------
# building blocks (Tensor in, Tensor out)


def _act(Z: Tensor, activation: str) -> Tensor:
    return ad.relu(Z) if activation == "relu" else Z


def _encode_t(FX: Tensor, F: Tensor, weights, activation="relu") -> Tensor:
    last = len(weights) - 1
    H = None
    for l, W in enumerate(weights):
        Z = FX @ W if l == 0 else F @ (H @ W)
        H = _act(Z, activation) if l < last else Z
    return H


def _se_gates_t(H: Tensor, W1: Tensor, W2: Tensor) -> Tensor:
    s = ad.mean(H, axis=0, keepdims=True)
    return ad.sigmoid(ad.relu(s @ W1) @ W2)


def _loss_re_t(Xn: Tensor, Xbar: Tensor) -> Tensor:
    num = ad.tsum(Xn * Xbar, axis=1)
    norm = ad.sqrt(ad.maximum(ad.tsum(Xbar * Xbar, axis=1), _NORM_FLOOR))
    cos = num / norm
    return ad.tsum((1.0 - cos) ** 2)


def _loss_hs_t(Ht: Tensor, target: Tensor) -> Tensor:
    n = Ht.shape[0]
    diff = Ht @ Ht.T - target
    return ad.tsum(diff * diff) * (1.0 / (n * n))


def _soft_assign_t(Ht: Tensor, centers: Tensor, beta: float) -> Tensor:
    n, d = Ht.shape
    c = centers.shape[0]
    diff = ad.reshape(Ht, (n, 1, d)) - ad.reshape(centers, (1, c, d))
    dist2 = ad.tsum(diff * diff, axis=2)
    kernel = (1.0 + dist2 * (1.0 / beta)) ** (-(beta + 1.0) / 2.0)
    return kernel / ad.tsum(kernel, axis=1, keepdims=True)


def _loss_clu_t(P: Tensor, Q: np.ndarray) -> Tensor:
    pos = Q > 0
    Qm = np.where(pos, Q, 0.0)
    const = float(np.sum(Qm * np.log(np.where(pos, Q, 1.0))))
    cross = ad.tsum(Tensor(Qm) * ad.log(ad.maximum(P, 1e-300)))
    return const - cross


def _row_normalized(X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    out = np.zeros_like(X)
    np.divide(X, norms, out=out, where=norms > 0)
    return out


# ---------------------------------------------------------------------------
# array-level API


def propagation_operator(basis_M: SpectralBasis, basis_G: SpectralBasis, config: ModelConfig) -> np.ndarray:
    """``(1 - mu) F_low(M) + mu F_high(G)`` for the configured filter combination."""
    low, high = FILTER_COMBOS[config.filter_combo]
    F = (1.0 - config.mu) * filter_matrix(low, basis_M)
    if config.mu:
        F = F + config.mu * filter_matrix(high, basis_G)
    return F


def encode(X, basis_M: SpectralBasis, basis_G: SpectralBasis, state: ModelState, config: ModelConfig) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != basis_M.n or X.shape[0] != basis_G.n:
        raise ShapeError("feature rows do not match the bases")
    F = propagation_operator(basis_M, basis_G, config)
    H = _encode_t(Tensor(F @ X), Tensor(F), [Tensor(w) for w in state.layer_weights], config.activation)
    if not np.all(np.isfinite(H.data)):
        raise NumericalError("non-finite activations in the encoder")
    return H.data


def se_gates(H, state: ModelState) -> np.ndarray:
    """Per-feature excitation weights, shape ``(1, d_h)``."""
    return _se_gates_t(Tensor(H), Tensor(state.se_down), Tensor(state.se_up)).data


def se_block(H, state: ModelState) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    return H * se_gates(H, state)


def hs_target(adj_norm, k_order: int) -> np.ndarray:
    """``sum_{i=1..k} adj_norm**i`` by repeated multiplication."""
    if k_order < 1:
        raise ConfigError("k_order must be >= 1")
    A = np.asarray(adj_norm, dtype=np.float64)
    power = A.copy()
    total = A.copy()
    for _ in range(k_order - 1):
        power = power @ A
        total += power
    return total


def loss_hs(Ht, adj_norm, k_order: int) -> float:
    return float(_loss_hs_t(Tensor(Ht), Tensor(hs_target(adj_norm, k_order))).data)


def loss_re(X, Xbar) -> float:
    X = np.asarray(X, dtype=np.float64)
    Xbar = np.asarray(Xbar, dtype=np.float64)
    if X.shape != Xbar.shape:
        raise ShapeError(f"shape mismatch {X.shape} vs {Xbar.shape}")
    return float(_loss_re_t(Tensor(_row_normalized(X)), Tensor(Xbar)).data)


def soft_assign(Ht, centers, beta: float = 1.0) -> np.ndarray:
    return _soft_assign_t(Tensor(Ht), Tensor(centers), beta).data


def target_distribution(P) -> np.ndarray:
    """Sharpened targets ``q_ij ∝ p_ij**2 / sum_i p_ij``; empty clusters get zero mass."""
    P = np.asarray(P, dtype=np.float64)
    col = P.sum(axis=0)
    w = np.zeros_like(P)
    np.divide(P * P, col[None, :], out=w, where=col[None, :] > 0)
    row = w.sum(axis=1, keepdims=True)
    Q = np.zeros_like(P)
    np.divide(w, row, out=Q, where=row > 0)
    return Q


def loss_clu(P, Q) -> float:
    """``KL(Q || P)`` with ``0 log 0 = 0``."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(Q, dtype=np.float64)
    pos = Q > 0
    with np.errstate(divide="ignore"):
        terms = np.where(pos, Q * (np.log(np.where(pos, Q, 1.0)) - np.log(np.where(pos, P, 1.0))), 0.0)
    return float(np.sum(terms))


def predict(P) -> np.ndarray:
    """Row-wise argmax; ties resolve to the smallest column."""
    return np.argmax(np.asarray(P), axis=1).astype(np.int64)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainingContext:
    """Everything fixed during training: features, propagation operator, targets."""

    X: np.ndarray
    Xn: np.ndarray
    F: np.ndarray
    FX: np.ndarray
    hs_target: np.ndarray
    n_clusters: int
    basis_M: SpectralBasis
    basis_G: SpectralBasis


def prepare_context(
    graph: AttributedGraph,
    restructured: RestructuredGraphs,
    config: ModelConfig,
    cache: EigenCache | None = None,
    cache_dir=None,
) -> TrainingContext:
    if graph.n_clusters is None:
        raise UsageError("the number of clusters is unknown (no labels and no n_clusters)")
    basis_M = eig_sym(normalize(restructured.homophilic).laplacian, cache, cache_dir)
    basis_G = eig_sym(normalize(restructured.heterophilic).laplacian, cache, cache_dir)
    F = propagation_operator(basis_M, basis_G, config)
    X = np.asarray(graph.features, dtype=np.float64)
    return TrainingContext(
        X=X,
        Xn=_row_normalized(X),
        F=F,
        FX=F @ X,
        hs_target=hs_target(normalize(graph.adjacency).adj_norm, config.k_order),
        n_clusters=int(graph.n_clusters),
        basis_M=basis_M,
        basis_G=basis_G,
    )


def _glorot(rng, fan_in, fan_out) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_state(n_features: int, config: ModelConfig) -> ModelState:
    config.validate()
    rng = np.random.default_rng(config.seed)
    dims = (n_features,) + tuple(config.hidden_dims)
    weights = [_glorot(rng, dims[l], dims[l + 1]) for l in range(config.n_layers)]
    d_h = dims[-1]
    d_mid = max(d_h // config.se_ratio, 1)
    return ModelState(
        layer_weights=weights,
        se_down=_glorot(rng, d_h, d_mid),
        se_up=_glorot(rng, d_mid, d_h),
        decoder_weights=_glorot(rng, d_h, n_features),
    )


@dataclass
class _Forward:
    H: Tensor
    gates: Tensor | None
    Ht: Tensor
    l_re: Tensor
    l_hs: Tensor | float
    l_clu: Tensor | float
    total: Tensor
    P: Tensor | None


def _forward(ctx: TrainingContext, params: dict, config: ModelConfig, Q=None) -> _Forward:
    weights = [params[f"W{l}"] for l in range(config.n_layers)]
    H = _encode_t(Tensor(ctx.FX), Tensor(ctx.F), weights, config.activation)
    if config.use_se:
        gates = _se_gates_t(H, params["se_down"], params["se_up"])
        Ht = H * gates
    else:
        gates, Ht = None, H
    Xbar = Ht @ params["decoder"]
    l_re = _loss_re_t(Tensor(ctx.Xn), Xbar)
    total = l_re
    if config.gamma1:
        l_hs = _loss_hs_t(Ht, Tensor(ctx.hs_target))
        total = total + config.gamma1 * l_hs
    else:
        l_hs = float(_loss_hs_t(Tensor(Ht.data), Tensor(ctx.hs_target)).data)
    P = None
    l_clu = 0.0
    if Q is not None and "centers" in params:
        P = _soft_assign_t(Ht, params["centers"], config.beta)
        l_clu = _loss_clu_t(P, Q)
        if config.gamma2:
            total = total + config.gamma2 * l_clu
    return _Forward(H, gates, Ht, l_re, l_hs, l_clu, total, P)


def _value(x) -> float:
    return float(x.data) if isinstance(x, Tensor) else float(x)


def _embed(ctx: TrainingContext, state: ModelState, config: ModelConfig) -> tuple:
    params = {k: Tensor(v) for k, v in state.parameters().items()}
    out = _forward(ctx, params, config)
    gates = None if out.gates is None else out.gates.data
    return out.Ht.data, gates


def _adam_step(state: ModelState, grads: dict, lr: float) -> None:
    b1, b2 = ADAM_BETAS
    for name, g in grads.items():
        slot = state.moments.get(name)
        if slot is None:
            slot = {"m": np.zeros_like(g), "v": np.zeros_like(g), "t": 0}
            state.moments[name] = slot
        slot["t"] += 1
        slot["m"] = b1 * slot["m"] + (1 - b1) * g
        slot["v"] = b2 * slot["v"] + (1 - b2) * g * g
        m_hat = slot["m"] / (1 - b1 ** slot["t"])
        v_hat = slot["v"] / (1 - b2 ** slot["t"])
        p = state.parameters()[name]
        state.set_parameter(name, p - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS))


def init_centers(Ht: np.ndarray, n_clusters: int, config: ModelConfig) -> np.ndarray:
    return kmeans(Ht, n_clusters, seed=config.seed, restarts=config.kmeans_restarts).centers


def _row_err(M: np.ndarray) -> float:
    return float(np.max(np.abs(M.sum(axis=1) - 1.0)))


def train(
    graph: AttributedGraph,
    restructured: RestructuredGraphs,
    config: ModelConfig,
    cache: EigenCache | None = None,
    cache_dir=None,
    context: TrainingContext | None = None,
) -> tuple[ModelState, TrainReport]:
    """Full-batch Adam on ``L_RE + gamma1 L_HS + gamma2 L_CLU``.

    Cluster centers are set by k-means on the SE output after
    ``warmup_epochs``; from then on the KL term is active and its target is
    refreshed every ``q_interval`` epochs (it is a constant in between).
    """
    config.validate()
    t0 = time.perf_counter()
    ctx = context or prepare_context(graph, restructured, config, cache, cache_dir)
    state = init_state(graph.n_features, config)
    report = TrainReport()
    last_good = state.copy()
    initial_total = None
    Q = None
    warm = config.warmup_epochs

    for epoch in range(config.epochs):
        if epoch == warm and state.centers is None:
            Ht, _ = _embed(ctx, state, config)
            state.centers = init_centers(Ht, ctx.n_clusters, config)
        clu_active = state.centers is not None and epoch >= warm
        if clu_active and (epoch - warm) % config.q_interval == 0:
            Ht, _ = _embed(ctx, state, config)
            P_now = soft_assign(Ht, state.centers, config.beta)
            if np.any(P_now.sum(axis=0) <= 1e-12):
                logger.warning("epoch %d: cluster collapse, empty column in P", epoch)
            Q = target_distribution(P_now)
            report.q_row_sum_max_err = max(report.q_row_sum_max_err, _row_err(Q))

        params = {k: Tensor(v, requires_grad=True) for k, v in state.parameters().items()}
        out = _forward(ctx, params, config, Q if clu_active else None)
        total = _value(out.total)
        if not np.isfinite(total) or not np.all(np.isfinite(out.Ht.data)):
            raise TrainingAborted(f"non-finite loss at epoch {epoch}", last_good, report)
        if initial_total is None:
            initial_total = total
        elif total > 10.0 * abs(initial_total) and total > initial_total:
            raise TrainingAborted(
                f"loss diverged at epoch {epoch}: {total:.4g} > 10 x initial {initial_total:.4g}",
                last_good,
                report,
            )
        if out.P is not None:
            report.p_row_sum_max_err = max(report.p_row_sum_max_err, _row_err(out.P.data))

        report.loss_re.append(_value(out.l_re))
        report.loss_hs.append(_value(out.l_hs))
        report.loss_clu.append(_value(out.l_clu) if clu_active else 0.0)
        report.loss_total.append(total)

        last_good = state.copy()
        out.total.backward()
        grads = {k: t.grad for k, t in params.items() if t.grad is not None}
        _adam_step(state, grads, config.lr)
        if not state.is_finite():
            raise TrainingAborted(f"non-finite parameters after epoch {epoch}", last_good, report)

    Ht, gates = _embed(ctx, state, config)
    if state.centers is None:
        state.centers = init_centers(Ht, ctx.n_clusters, config)
    P = soft_assign(Ht, state.centers, config.beta)
    report.p_row_sum_max_err = max(report.p_row_sum_max_err, _row_err(P))
    report.soft_assignment = P
    report.labels = predict(P)
    report.attention = gates
    report.embedding = Ht
    report.seconds = time.perf_counter() - t0
    return state, report


def infer(ctx: TrainingContext, state: ModelState, config: ModelConfig) -> dict:
    """Embedding, SE gates, soft assignment and labels for a trained state."""
    Ht, gates = _embed(ctx, state, config)
    out = {"embedding": Ht, "attention": gates, "soft_assignment": None, "labels": None}
    if state.centers is not None:
        P = soft_assign(Ht, state.centers, config.beta)
        out["soft_assignment"] = P
        out["labels"] = predict(P)
    return out


# ---------------------------------------------------------------------------
# gradient audit


def objective(ctx: TrainingContext, state: ModelState, config: ModelConfig, Q=None) -> float:
    params = {k: Tensor(v) for k, v in state.parameters().items()}
    return _value(_forward(ctx, params, config, Q).total)


def gradient_errors(
    ctx: TrainingContext,
    state: ModelState,
    config: ModelConfig,
    Q=None,
    step: float = 1e-5,
) -> dict:
    """Relative error ``|g_ad - g_fd| / max(|g_ad|, |g_fd|)`` (2-norms) per parameter tensor."""
    params = {k: Tensor(v, requires_grad=True) for k, v in state.parameters().items()}
    out = _forward(ctx, params, config, Q)
    out.total.backward()
    errors = {}
    for name, t in params.items():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        base = state.parameters()[name]
        numeric = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            probe = state.copy()
            w = base.copy()
            w[idx] += step
            probe.set_parameter(name, w)
            f_plus = objective(ctx, probe, config, Q)
            w = base.copy()
            w[idx] -= step
            probe.set_parameter(name, w)
            f_minus = objective(ctx, probe, config, Q)
            numeric[idx] = (f_plus - f_minus) / (2 * step)
        scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
        errors[name] = 0.0 if scale == 0 else float(np.linalg.norm(analytic - numeric) / scale)
        errors[name + ":norm"] = float(np.linalg.norm(analytic))
    return errors


def check_gradients(
    state: ModelState | None,
    config: ModelConfig,
    probe_graph: AttributedGraph,
    restructured: RestructuredGraphs | None = None,
    step: float = 1e-5,
) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    When the KL term is weighted in, cluster centers are placed by k-means
    on the current embedding (if ``state`` has none) and the target is frozen
    at the resulting soft assignment.
    """
    from .restructure import restructure

    config.validate()
    if probe_graph.n_nodes > 20:
        raise UsageError("gradient audit expects a probe graph with at most 20 nodes")
    restructured = restructured or restructure(probe_graph, top_k=min(5, probe_graph.n_nodes - 1))
    ctx = prepare_context(probe_graph, restructured, config, cache=EigenCache())
    state = (state or init_state(probe_graph.n_features, config)).copy()
    Q = None
    if config.gamma2:
        Ht, _ = _embed(ctx, state, config)
        if state.centers is None:
            state.centers = init_centers(Ht, ctx.n_clusters, config)
        Q = target_distribution(soft_assign(Ht, state.centers, config.beta))
    errs = gradient_errors(ctx, state, config, Q, step)
    return max(v for k, v in errs.items() if not k.endswith(":norm"))


# ---------------------------------------------------------------------------
# checkpoints

CKPT_MAGIC = b"PFGCCKPT"
CKPT_VERSION = 1


def save_checkpoint(path, state: ModelState, config: ModelConfig, extra: dict | None = None) -> None:
    """Binary checkpoint: magic, u32 version, u64 header length, JSON header, f64 tensors."""
    tensors = list(state.parameters().items())
    steps = {}
    for name, slot in sorted(state.moments.items()):
        tensors.append((f"adam.m.{name}", slot["m"]))
        tensors.append((f"adam.v.{name}", slot["v"]))
        steps[name] = int(slot["t"])
    header = {
        "version": CKPT_VERSION,
        "config": config.to_dict(),
        "seed": config.seed,
        "adam_steps": steps,
        "extra": extra or {},
        "tensors": [{"name": n, "shape": list(np.shape(a))} for n, a in tensors],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(struct.pack("<IQ", CKPT_VERSION, len(blob)))
        fh.write(blob)
        for _, a in tensors:
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> tuple[ModelState, ModelConfig, dict]:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(8) != CKPT_MAGIC:
            raise NumericalError(f"{path}: not a checkpoint file")
        version, hlen = struct.unpack("<IQ", fh.read(12))
        if version != CKPT_VERSION:
            raise NumericalError(f"{path}: unsupported checkpoint version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        arrays = {}
        for spec in header["tensors"]:
            shape = tuple(spec["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(8 * count)
            if len(buf) != 8 * count:
                raise NumericalError(f"{path}: truncated tensor {spec['name']}")
            arrays[spec["name"]] = np.frombuffer(buf, dtype="<f8").astype(np.float64).reshape(shape)
    config = ModelConfig.from_dict(header["config"])
    n_layers = config.n_layers
    state = ModelState(
        layer_weights=[arrays[f"W{l}"] for l in range(n_layers)],
        se_down=arrays["se_down"],
        se_up=arrays["se_up"],
        decoder_weights=arrays["decoder"],
        centers=arrays.get("centers"),
    )
    for name, t in header["adam_steps"].items():
        state.moments[name] = {"m": arrays[f"adam.m.{name}"], "v": arrays[f"adam.v.{name}"], "t": t}
    return state, config, header.get("extra", {})
