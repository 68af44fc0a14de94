"""``pfgc`` command-line interface.

Subcommands: restructure, train, evaluate, verify-theorem, commonality, grid.
Exit status is 0 on success, 1 for data problems and 2 for configuration or
usage problems; errors are reported as one ``pfgc: <kind>: <message>`` line
on standard error.
"""

from __future__ import annotations

import argparse
import csv
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, PFGCError, UsageError
from .evaluation import attention_mask_experiment, evaluate_clustering, write_mask_report
from .graph import AttributedGraph, classify_edges_by_commonality, homophily_ratio
from .io import FORMATS, load_graph, write_edges_csv
from .model import (
    FILTER_COMBOS,
    ModelConfig,
    infer,
    load_checkpoint,
    prepare_context,
    save_checkpoint,
    train,
)
from .restructure import BENCHMARK_EPSILONS, restructure
from .spectral import EigenCache
from .theorem import parse_sweep, sweep_configs, verify_theorem, write_theorem_csv

logger = logging.getLogger("pfgc")

LARGE_GRAPH = 10000
GAMMA_VALUES = (1e-3, 1e-2, 1e-1, 1.0, 10.0)
DEFAULT_GRID = {
    "mu": [0.1, 0.3, 0.5, 0.7],
    "gamma1": list(GAMMA_VALUES),
    "gamma2": list(GAMMA_VALUES),
    "lr": [1e-2, 1e-3],
    "epsilon": list(BENCHMARK_EPSILONS),
}
# execution-only settings; they do not change any result and are not echoed
_RUNTIME_KEYS = ("out_dir", "cache_dir", "jobs", "allow_large")


@dataclass
class RunConfig:
    dataset: str | None = None
    format: str = "canonical_csv"
    n_clusters: int | None = None
    epsilon: float = 0.01
    top_k: int = 5
    mu: float = 0.5
    k_order: int = 5
    beta: float = 1.0
    gamma1: float = 1.0
    gamma2: float = 1.0
    lr: float = 1e-2
    epochs: int = 200
    warmup_epochs: int = 50
    q_interval: int = 5
    hidden_dims: list = field(default_factory=lambda: [256, 64])
    se_ratio: int = 4
    use_se: bool = True
    kmeans_restarts: int = 10
    seeds: list = field(default_factory=lambda: [0])
    filter_combo: str = "PFGC"
    grid: object = None
    cache_dir: str | None = None
    out_dir: str = "out"
    jobs: int = 1
    allow_large: bool = False

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**d)

    def validate(self) -> "RunConfig":
        if self.format not in FORMATS:
            raise ConfigError(f"unknown format {self.format!r}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.filter_combo not in FILTER_COMBOS:
            raise ConfigError(f"unknown filter_combo {self.filter_combo!r}")
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        self.model_config(self.seeds[0]).validate()
        return self

    def model_config(self, seed: int) -> ModelConfig:
        return ModelConfig(
            n_layers=len(self.hidden_dims),
            hidden_dims=tuple(self.hidden_dims),
            se_ratio=self.se_ratio,
            mu=self.mu,
            k_order=self.k_order,
            beta=self.beta,
            gamma1=self.gamma1,
            gamma2=self.gamma2,
            lr=self.lr,
            epochs=self.epochs,
            warmup_epochs=self.warmup_epochs,
            q_interval=self.q_interval,
            seed=int(seed),
            filter_combo=self.filter_combo,
            use_se=self.use_se,
            kmeans_restarts=self.kmeans_restarts,
        )

    def echo(self) -> dict:
        d = asdict(self)
        for k in _RUNTIME_KEYS:
            d.pop(k)
        return d

    def with_values(self, **values) -> "RunConfig":
        d = asdict(self)
        d.update(values)
        return RunConfig.from_dict(d)


# ---------------------------------------------------------------------------
# helpers


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(cfg: RunConfig) -> AttributedGraph:
    if not cfg.dataset:
        raise ConfigError("--dataset is required")
    g = load_graph(cfg.dataset, cfg.format, n_clusters=cfg.n_clusters)
    if g.n_nodes > LARGE_GRAPH and not cfg.allow_large:
        raise ConfigError(
            f"graph has {g.n_nodes} nodes (> {LARGE_GRAPH}); pass --allow-large to accept dense eigendecomposition cost"
        )
    return g


def _cache(cfg: RunConfig) -> EigenCache:
    return EigenCache(cfg.cache_dir or os.environ.get("PFGC_CACHE_DIR") or None)


def _hr(adjacency, graph: AttributedGraph):
    return homophily_ratio(adjacency, graph.labels) if graph.has_labels else None


def _finite_or_none(x):
    return None if x is None or not np.isfinite(x) else float(x)


def run_single(graph: AttributedGraph, cfg: RunConfig, seed: int, cache: EigenCache, restructured=None) -> dict:
    """Train one seed; returns metrics, the state and the report."""
    restructured = restructured or restructure(graph, cfg.epsilon, cfg.top_k)
    mcfg = cfg.model_config(seed)
    state, report = train(graph, restructured, mcfg, cache=cache)
    metrics = {"seed": int(seed), "acc": None, "nmi": None}
    if graph.has_labels:
        m = evaluate_clustering(report.labels, graph.labels)
        metrics.update(acc=m.acc, nmi=m.nmi)
    return {"metrics": metrics, "state": state, "report": report, "model_config": mcfg}


def _best(rows: list) -> dict | None:
    scored = [r for r in rows if r.get("acc") is not None]
    if not scored:
        return None
    return max(scored, key=lambda r: (r["acc"], r["nmi"]))


# ---------------------------------------------------------------------------
# subcommands


def cmd_restructure(cfg: RunConfig) -> int:
    graph = _load(cfg)
    out = _out_dir(cfg)
    rg = restructure(graph, cfg.epsilon, cfg.top_k)
    n_m = write_edges_csv(out / "M.edges.csv", rg.homophilic)
    n_g = write_edges_csv(out / "G.edges.csv", rg.heterophilic)
    report = {
        "config": cfg.echo(),
        "n_nodes": graph.n_nodes,
        "edges": {"A": graph.n_edges, "M": n_m, "G": n_g},
        "homophily": {
            "A": _finite_or_none(_hr(graph.adjacency, graph)),
            "M": _finite_or_none(_hr(rg.homophilic, graph)),
            "G": _finite_or_none(_hr(rg.heterophilic, graph)),
        },
    }
    _dump_json(out / "restructure_report.json", report)
    print(json.dumps(report["homophily"], sort_keys=True))
    return 0


def cmd_train(cfg: RunConfig) -> int:
    if cfg.grid is not None:
        return cmd_grid(cfg)
    graph = _load(cfg)
    out = _out_dir(cfg)
    cache = _cache(cfg)
    rg = restructure(graph, cfg.epsilon, cfg.top_k)
    per_seed, reports, best_run = [], {}, None
    for seed in cfg.seeds:
        run = run_single(graph, cfg, seed, cache, rg)
        per_seed.append(run["metrics"])
        reports[str(seed)] = run["report"].to_dict(include_timing=True)
        if best_run is None or (
            run["metrics"]["acc"] is not None and run["metrics"]["acc"] > best_run["metrics"]["acc"]
        ):
            best_run = run
        logger.info("seed %s: acc=%s nmi=%s", seed, run["metrics"]["acc"], run["metrics"]["nmi"])
    best = _best(per_seed)
    _dump_json(out / "metrics.json", {"config": cfg.echo(), "per_seed": per_seed, "best": best})
    _dump_json(out / "train_report.json", reports)
    save_checkpoint(
        out / "model.ckpt",
        best_run["state"],
        best_run["model_config"],
        extra={"epsilon": cfg.epsilon, "top_k": cfg.top_k, "dataset": cfg.dataset, "format": cfg.format},
    )
    print(json.dumps({"best": best}, sort_keys=True))
    return 0


def cmd_evaluate(cfg: RunConfig, checkpoint: str) -> int:
    graph = _load(cfg)
    if not graph.has_labels:
        raise UsageError("evaluate needs a labelled dataset")
    out = _out_dir(cfg)
    state, mcfg, extra = load_checkpoint(checkpoint)
    if state.centers is None:
        raise DataError(f"{checkpoint}: checkpoint has no cluster centers")
    rg = restructure(graph, extra.get("epsilon", cfg.epsilon), extra.get("top_k", cfg.top_k))
    ctx = prepare_context(graph, rg, mcfg, cache=_cache(cfg))
    res = infer(ctx, state, mcfg)
    m = evaluate_clustering(res["labels"], graph.labels)
    metrics = {"acc": m.acc, "nmi": m.nmi, "seed": mcfg.seed, "config": mcfg.to_dict(), "checkpoint_extra": extra}
    if res["attention"] is not None:
        masks = attention_mask_experiment(
            res["embedding"], res["attention"], graph.labels, graph.n_clusters, seed=mcfg.seed, restarts=mcfg.kmeans_restarts
        )
        write_mask_report(out / "mask_report.csv", masks)
        metrics["mask"] = masks
    _dump_json(out / "metrics.json", metrics)
    print(json.dumps({"acc": m.acc, "nmi": m.nmi}, sort_keys=True))
    return 0


def cmd_commonality(cfg: RunConfig, threshold: float) -> int:
    graph = _load(cfg)
    out = _out_dir(cfg)
    rep = classify_edges_by_commonality(graph, threshold)
    rows = rep.rows()
    with open(out / "commonality.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for r in rows:
        print(f"{r['edge_class']}: proportion_correct={r['proportion_correct']:.4f} precision={r['precision']:.4f}")
    return 0


def cmd_verify_theorem(args) -> int:
    targets = parse_sweep(args.sweep)
    configs = sweep_configs(args.n, args.clusters, targets, args.mean_degree, args.seed)
    reports = verify_theorem(configs, n_trials=args.trials, seed=args.seed)
    out = Path(args.out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_theorem_csv(out, reports)
    for rep in reports:
        print(f"r={rep.r:.3f} {rep.pair} mc={rep.mc_gap_mean:+.3e}±{rep.mc_gap_stderr:.1e} analytic={rep.analytic_gap:+.3e} {rep.verdict}")
    return 0


# ---------------------------------------------------------------------------
# grid search


def resolve_grid(spec) -> dict:
    """``"default"``, a JSON object, or a path to a JSON file -> axis name -> values."""
    if spec is None or spec == "default":
        return {k: list(v) for k, v in DEFAULT_GRID.items()}
    if isinstance(spec, dict):
        grid = spec
    else:
        text = str(spec)
        if os.path.isfile(text):
            text = Path(text).read_text(encoding="utf-8")
        try:
            grid = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"grid must be 'default', a JSON object or a JSON file: {exc}") from exc
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("grid must be a non-empty mapping of axis -> list of values")
    allowed = {f.name for f in fields(RunConfig)} - {"grid", "seeds", "dataset", "format", *_RUNTIME_KEYS}
    bad = sorted(set(grid) - allowed)
    if bad:
        raise ConfigError(f"grid axes not allowed: {', '.join(bad)}")
    out = {}
    for k, v in grid.items():
        vals = v if isinstance(v, list) else [v]
        if not vals:
            raise ConfigError(f"grid axis {k!r} is empty")
        out[k] = vals
    return out


def lattice_points(grid: dict, seeds) -> list:
    axes = sorted(grid)
    pts = []
    for combo in itertools.product(*(grid[a] for a in axes)):
        for seed in seeds:
            pts.append((dict(zip(axes, combo)), int(seed)))
    return pts


def _row_key(point: dict, seed: int) -> str:
    return json.dumps({"point": point, "seed": seed}, sort_keys=True)


_WORKER_MEMO: dict = {}


def _grid_worker(payload):
    cfg_dict, point, seed = payload
    cfg = RunConfig.from_dict(cfg_dict).with_values(**point, grid=None)
    # graphs, eigendecompositions and restructurings are shared between points of one process
    gkey = (cfg.dataset, cfg.format, cfg.n_clusters)
    if gkey not in _WORKER_MEMO:
        _WORKER_MEMO.clear()
        _WORKER_MEMO[gkey] = (_load(cfg), _cache(cfg), {})
    graph, cache, structures = _WORKER_MEMO[gkey]
    skey = (cfg.epsilon, cfg.top_k)
    if skey not in structures:
        structures[skey] = restructure(graph, cfg.epsilon, cfg.top_k)
    run = run_single(graph, cfg, seed, cache, structures[skey])
    return {"key": _row_key(point, seed), **point, "seed": seed, "acc": run["metrics"]["acc"], "nmi": run["metrics"]["nmi"]}


def cmd_grid(cfg: RunConfig) -> int:
    graph = _load(cfg)
    if not graph.has_labels:
        raise UsageError("grid search selects by ACC and needs a labelled dataset")
    grid = resolve_grid(cfg.grid)
    axes = sorted(grid)
    out = _out_dir(cfg)
    lattice_file = out / "lattice.csv"
    columns = ["key", *axes, "seed", "acc", "nmi"]

    done = {}
    if lattice_file.is_file():
        with open(lattice_file, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                if row.get("key") and row.get("acc") not in (None, ""):
                    done[row["key"]] = row
    points = lattice_points(grid, cfg.seeds)
    todo = [(p, s) for p, s in points if _row_key(p, s) not in done]
    logger.info("grid: %d points, %d already done", len(points), len(points) - len(todo))

    base = asdict(cfg)
    payloads = [(base, p, s) for p, s in todo]
    append = open(lattice_file, "a", newline="", encoding="utf-8")
    try:
        writer = csv.DictWriter(append, fieldnames=columns, lineterminator="\n")
        if not done:
            append.seek(0)
            append.truncate()
            writer.writeheader()
        if cfg.jobs > 1 and len(payloads) > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                results = pool.map(_grid_worker, payloads)
                for row in results:
                    writer.writerow(row)
                    append.flush()
                    done[row["key"]] = row
        else:
            for payload in payloads:
                row = _grid_worker(payload)
                writer.writerow(row)
                append.flush()
                done[row["key"]] = row
    finally:
        append.close()

    # rewrite in lattice order so the file is independent of completion order
    rows = [done[_row_key(p, s)] for p, s in points]
    with open(lattice_file, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)

    parsed = []
    for (p, s), row in zip(points, rows):
        parsed.append({**p, "seed": s, "acc": float(row["acc"]), "nmi": float(row["nmi"])})
    best = _best(parsed)
    _dump_json(out / "metrics.json", {"config": cfg.echo(), "grid": grid, "lattice": parsed, "best": best})
    print(json.dumps({"best": best}, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# argument parsing


def _csv_ints(text: str) -> list:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


_FLAG_TYPES = {
    "dataset": str,
    "format": str,
    "n_clusters": int,
    "epsilon": float,
    "top_k": int,
    "mu": float,
    "k_order": int,
    "beta": float,
    "gamma1": float,
    "gamma2": float,
    "lr": float,
    "epochs": int,
    "warmup_epochs": int,
    "q_interval": int,
    "hidden_dims": _csv_ints,
    "se_ratio": int,
    "use_se": _bool,
    "kmeans_restarts": int,
    "seeds": _csv_ints,
    "filter_combo": str,
    "grid": str,
    "cache_dir": str,
    "out_dir": str,
    "jobs": int,
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with run settings; flags override it")
    for key, typ in _FLAG_TYPES.items():
        flag = "--" + key.replace("_", "-")
        p.add_argument(flag, dest=key, type=typ, default=None)
    p.add_argument("--out", dest="out_dir", type=str, default=None, help="alias of --out-dir")
    p.add_argument("--allow-large", dest="allow_large", action="store_true", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pfgc", description="Attributed graph clustering with restructured graphs.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("restructure", "train", "grid", "commonality", "evaluate"):
        p = sub.add_parser(name)
        _add_run_flags(p)
        if name == "restructure":
            p.add_argument("--input", dest="dataset", type=str, default=None, help="alias of --dataset")
        if name == "commonality":
            p.add_argument("--threshold", type=float, default=0.5)
        if name == "evaluate":
            p.add_argument("--checkpoint", required=True)

    p = sub.add_parser("verify-theorem")
    p.add_argument("--n", type=int, default=120)
    p.add_argument("--clusters", type=int, default=3)
    p.add_argument("--sweep", default="r=0.05:0.95:0.1")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--mean-degree", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="report.csv")
    return parser


def config_from_args(args) -> RunConfig:
    base = {}
    if getattr(args, "config", None):
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("config file must hold a JSON object")
    cfg = RunConfig.from_dict(base)
    overrides = {k: getattr(args, k) for k in list(_FLAG_TYPES) + ["allow_large"] if getattr(args, k, None) is not None}
    return cfg.with_values(**overrides).validate()


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify-theorem":
            if args.trials < 2:
                raise UsageError("--trials must be at least 2")
            return cmd_verify_theorem(args)
        cfg = config_from_args(args)
        if args.command == "restructure":
            return cmd_restructure(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "grid":
            if cfg.grid is None:
                cfg.grid = "default"
            return cmd_grid(cfg)
        if args.command == "commonality":
            return cmd_commonality(cfg, args.threshold)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint)
        raise UsageError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"pfgc: {exc.kind}: {_one_line(exc)}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"pfgc: {exc.kind}: {_one_line(exc)}", file=sys.stderr)
        return 1
    except PFGCError as exc:
        print(f"pfgc: {exc.kind}: {_one_line(exc)}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"pfgc: data: {_one_line(exc)}", file=sys.stderr)
        return 1


def _one_line(exc) -> str:
    return " ".join(str(exc).split())


if __name__ == "__main__":
    sys.exit(main())
