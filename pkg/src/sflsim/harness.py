"""Experiment orchestration: problem construction, optimum oracles, grid
search over learning rates, CSV emission, and the paired-comparison
recipes for the quadratic benchmark groups and logistic regression.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from . import data as datamod
from .objectives import (
    LogisticClient,
    MultiDimClient,
    MultiDimInstance,
    QuadraticClient,
    build_hard_instance,
    build_quadratic_group,
    global_gradient,
    global_value,
)
from .trainers import RunRecord, TrainingConfig, run_pfl, run_sfl

__all__ = [
    "ExperimentConfig",
    "MetricRow",
    "Problem",
    "FStar",
    "OracleError",
    "fstar_oracle",
    "build_problem",
    "run_experiment",
    "grid_search",
    "summarize",
    "rows_to_csv",
    "figure2",
    "parse_config",
    "DEFAULT_LR_GRID",
    "CSV_HEADER",
]

# Default learning-rate grid for tuning: 10^-2.5 .. 10^-0.5.
DEFAULT_LR_GRID = tuple(10.0**e for e in (-2.5, -2.0, -1.5, -1.0, -0.5))

CSV_HEADER = "method,task,seed,lr,round,gap,grad_norm_sq,min_grad_norm_sq,dist_to_opt,diverged"


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class FStar:
    """Optimal value and (when available) minimizer; exact=False marks a
    numerically obtained optimum."""

    value: float
    x: Optional[np.ndarray]
    exact: bool


@dataclass(frozen=True)
class MetricRow:
    method: str
    task: str
    seed: int
    lr: float
    round: int
    gap: float
    grad_norm_sq: float
    min_grad_norm_sq: float
    dist_to_opt: Optional[float]
    diverged: bool


@dataclass(frozen=True)
class Problem:
    task_id: str
    clients: tuple
    x0: object
    fstar: Optional[FStar]
    gap_kind: str  # "gap" | "loss"


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a problem, the methods to run, and the grid to span.

    ``task`` uses the textual forms ``group:<1..10>``,
    ``hard:<kind>:<regime>`` (parameters in hard_params; M/K/R come from
    clients/local_steps/rounds), ``logistic:synthetic`` or
    ``logistic:<path>``.  SFL runs use sfl_lr_factor times the grid value,
    so paired quadratic comparisons can halve the sequential rate.
    """

    task: str
    methods: tuple[str, ...] = ("SFL", "PFL")
    rounds: int = 100
    local_steps: int = 10
    clients: Optional[int] = None
    participants: Optional[int] = None
    lr_grid: tuple[float, ...] = DEFAULT_LR_GRID
    seeds: tuple[int, ...] = (0,)
    clip: Optional[float] = None
    batch: Optional[int] = None
    sfl_lr_factor: float = 1.0
    x0: Optional[float] = None
    gap_mode: str = "auto"  # auto | loss | oracle
    # logistic task knobs
    reg: float = 0.0
    labels_per_client: int = 1
    partition_seed: int = 0
    n: int = 2000
    dim: int = 20
    data_seed: int = 0
    # hard-instance parameters (lam, lam0, lam1, sigma, zeta, mu)
    hard_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.methods:
            raise ValueError("methods must be non-empty")
        if any(m not in ("SFL", "PFL") for m in self.methods):
            raise ValueError(f"methods must be SFL/PFL, got {self.methods}")
        if not self.lr_grid:
            raise ValueError("lr_grid must be non-empty")
        if not self.seeds:
            raise ValueError("seeds must be non-empty")
        if self.gap_mode not in ("auto", "loss", "oracle"):
            raise ValueError(f"unknown gap_mode {self.gap_mode!r}")


# ---------------------------------------------------------------------------
# optimum oracles


def _piecewise_dim_optimum(clients_1d: Sequence[QuadraticClient]) -> tuple[float, float]:
    """Exact minimizer and value of the mean of one-dimensional piecewise
    quadratics (ties at zero gradient pick x = 0)."""
    M = len(clients_1d)
    a_neg = sum(c.curv_neg for c in clients_1d) / M
    a_pos = sum(c.curv_pos for c in clients_1d) / M
    b = sum(c.linear for c in clients_1d) / M
    if b > 0:
        if a_neg <= 0:
            raise OracleError("objective unbounded below on the x < 0 branch")
        x = -b / a_neg
        return x, 0.5 * a_neg * x * x + b * x
    if b < 0:
        if a_pos <= 0:
            raise OracleError("objective unbounded below on the x >= 0 branch")
        x = -b / a_pos
        return x, 0.5 * a_pos * x * x + b * x
    return 0.0, 0.0


def _logistic_optimum(clients, tol: float = 1e-10, max_iters: int = 10**6) -> FStar:
    """Full-batch gradient descent with Armijo backtracking until the
    gradient norm falls below tol."""
    dim = clients[0].dim
    x = np.zeros(dim)
    f = global_value(clients, x)
    step = 1.0
    for _ in range(max_iters):
        g = global_gradient(clients, x)
        norm_sq = float(np.dot(g, g))
        if math.sqrt(norm_sq) <= tol:
            return FStar(value=f, x=x, exact=False)
        step = min(step * 2.0, 1e12)
        while True:
            cand = x - step * g
            f_cand = global_value(clients, cand)
            if f_cand <= f - 0.5 * step * norm_sq or step < 1e-300:
                break
            step *= 0.5
        x, f = cand, f_cand
    g = global_gradient(clients, x)
    raise OracleError(
        f"optimum search did not reach tol={tol:g} within {max_iters} iterations "
        f"(final gradient norm {float(np.linalg.norm(g)):.3e})"
    )


def fstar_oracle(problem, tol: float = 1e-10, max_iters: int = 10**6) -> FStar:
    """Exact optimum for piecewise-quadratic families (closed form per
    dimension), numeric optimum for logistic families."""
    if isinstance(problem, MultiDimInstance):
        xs, vals = zip(*(_piecewise_dim_optimum(dim) for dim in problem.per_dim))
        return FStar(value=float(sum(vals)), x=np.array(xs), exact=True)
    clients = list(problem)
    if all(isinstance(c, QuadraticClient) for c in clients):
        x, v = _piecewise_dim_optimum(clients)
        return FStar(value=v, x=np.float64(x), exact=True)
    if all(isinstance(c, MultiDimClient) for c in clients):
        dims = len(clients[0].parts)
        xs, vals = zip(
            *(_piecewise_dim_optimum([c.parts[d] for c in clients]) for d in range(dims))
        )
        return FStar(value=float(sum(vals)), x=np.array(xs), exact=True)
    if all(isinstance(c, LogisticClient) for c in clients):
        return _logistic_optimum(clients, tol=tol, max_iters=max_iters)
    raise OracleError("unsupported problem family")


# ---------------------------------------------------------------------------
# problem construction


def build_problem(cfg: ExperimentConfig) -> Problem:
    kind, _, rest = cfg.task.partition(":")
    if kind == "group":
        gid = int(rest)
        clients = build_quadratic_group(gid)
        x0 = 0.0 if cfg.x0 is None else float(cfg.x0)
        fstar = fstar_oracle(clients) if cfg.gap_mode != "loss" else None
        return Problem(cfg.task, tuple(clients), x0, fstar, "gap" if fstar else "loss")
    if kind == "hard":
        hkind, _, regime = rest.partition(":")
        M = cfg.clients
        if M is None:
            raise ValueError("hard tasks need an explicit clients count")
        params = dict(cfg.hard_params, M=M, K=cfg.local_steps, R=cfg.rounds)
        inst = build_hard_instance(hkind, regime, params)
        x0 = inst.init if cfg.x0 is None else np.full(inst.dims, float(cfg.x0))
        fstar = fstar_oracle(inst) if cfg.gap_mode != "loss" else None
        return Problem(cfg.task, tuple(inst.clients), x0, fstar, "gap" if fstar else "loss")
    if kind == "logistic":
        if rest == "synthetic":
            ds = datamod.generate_synthetic(cfg.n, cfg.dim, cfg.data_seed)
        else:
            path = Path(rest)
            if not path.exists():
                raise FileNotFoundError(f"dataset not found: {path}")
            ds = datamod.parse_libsvm(path.read_text())
        M = cfg.clients
        if M is None:
            raise ValueError("logistic tasks need an explicit clients count")
        part = datamod.partition_by_labels(ds, M, cfg.labels_per_client, cfg.partition_seed)
        clients = []
        for shard in part.shards:
            feats, labels = datamod.shard_matrix(ds, shard)
            clients.append(
                LogisticClient(feats, labels, reg=cfg.reg, batch=cfg.batch)
            )
        x0 = np.zeros(ds.dim)
        use_oracle = cfg.gap_mode == "oracle" or (cfg.gap_mode == "auto" and cfg.reg > 0)
        fstar = fstar_oracle(clients) if use_oracle else None
        return Problem(cfg.task, tuple(clients), x0, fstar, "gap" if fstar else "loss")
    raise ValueError(f"unknown task {cfg.task!r}")


# ---------------------------------------------------------------------------
# running


def _cell_rows(cfg: ExperimentConfig, problem: Problem, method: str, lr: float, seed: int):
    applied_lr = lr * cfg.sfl_lr_factor if method == "SFL" else lr
    tc = TrainingConfig(
        rounds=cfg.rounds,
        clients=len(problem.clients),
        local_steps=cfg.local_steps,
        client_lr=applied_lr,
        participants=cfg.participants,
        clip=cfg.clip,
        batch=cfg.batch,
        seed=seed,
    )
    runner = run_sfl if method == "SFL" else run_pfl
    rec = runner(tc, list(problem.clients), problem.x0)
    f_star = problem.fstar.value if problem.fstar else 0.0
    dists = rec.distances(problem.fstar.x) if problem.fstar and problem.fstar.x is not None else None
    rows = []
    min_gsq = math.inf
    for r in range(len(rec.xs)):
        min_gsq = min(min_gsq, float(rec.grad_sq[r]))
        rows.append(
            MetricRow(
                method=method,
                task=problem.task_id,
                seed=seed,
                lr=applied_lr,
                round=r,
                gap=float(rec.values[r]) - f_star,
                grad_norm_sq=float(rec.grad_sq[r]),
                min_grad_norm_sq=min_gsq,
                dist_to_opt=float(dists[r]) if dists is not None else None,
                diverged=rec.diverged,
            )
        )
    return rows, rec


def run_experiment(cfg: ExperimentConfig) -> list[MetricRow]:
    """Run every (method x lr x seed) cell in deterministic key order and
    return all per-round metric rows (divergent cells are flagged, not
    dropped)."""
    problem = build_problem(cfg)
    rows: list[MetricRow] = []
    for method in sorted(cfg.methods):
        for lr in sorted(cfg.lr_grid):
            for seed in sorted(cfg.seeds):
                cell, _ = _cell_rows(cfg, problem, method, lr, seed)
                rows.extend(cell)
    return rows


def summarize(rows: Sequence[MetricRow]) -> list[dict]:
    """Per-(method, lr) mean/min/max of the final-round gap across seeds."""
    finals: dict[tuple[str, float], dict[int, MetricRow]] = {}
    for row in rows:
        per_seed = finals.setdefault((row.method, row.lr), {})
        prev = per_seed.get(row.seed)
        if prev is None or row.round >= prev.round:
            per_seed[row.seed] = row
    out = []
    for (method, lr) in sorted(finals):
        per_seed = finals[(method, lr)]
        gaps = [math.inf if r.diverged else r.gap for r in per_seed.values()]
        out.append(
            {
                "method": method,
                "lr": lr,
                "mean_final_gap": sum(gaps) / len(gaps),
                "min_final_gap": min(gaps),
                "max_final_gap": max(gaps),
                "n_seeds": len(gaps),
                "n_diverged": sum(1 for r in per_seed.values() if r.diverged),
            }
        )
    return out


def grid_search(cfg: ExperimentConfig) -> tuple[dict[str, float], list[MetricRow]]:
    """Pick, per method, the grid lr minimizing the mean final gap across
    seeds (divergent seeds count as infinite; ties prefer the smaller lr).
    """
    rows = run_experiment(cfg)
    summary = summarize(rows)
    best: dict[str, float] = {}
    for method in cfg.methods:
        candidates = [s for s in summary if s["method"] == method]
        usable = [s for s in candidates if math.isfinite(s["mean_final_gap"])]
        if not usable:
            raise OracleError(f"every grid cell diverged for {method}")
        score = min(s["mean_final_gap"] for s in usable)
        # Ties (within a tiny whisker) resolve toward the smaller lr.
        whisker = 1e-15 + 1e-12 * abs(score)
        best[method] = min(s["lr"] for s in usable if s["mean_final_gap"] <= score + whisker)
    return best, rows


def rows_to_csv(rows: Sequence[MetricRow]) -> str:
    """Fixed-schema CSV; identical inputs give byte-identical output."""
    lines = [CSV_HEADER]
    for r in rows:
        dist = "" if r.dist_to_opt is None else repr(float(r.dist_to_opt))
        lines.append(
            ",".join(
                [
                    r.method,
                    r.task,
                    str(r.seed),
                    repr(float(r.lr)),
                    str(r.round),
                    repr(float(r.gap)),
                    repr(float(r.grad_norm_sq)),
                    repr(float(r.min_grad_norm_sq)),
                    dist,
                    "1" if r.diverged else "0",
                ]
            )
        )
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# recipes


def figure2(
    out_dir: Union[str, Path],
    rounds: int = 100,
    local_steps: int = 10,
    seeds: Sequence[int] = tuple(range(10)),
    lr_grid: Sequence[float] = DEFAULT_LR_GRID,
    groups: Sequence[int] = tuple(range(1, 11)),
    make_plot: bool = True,
) -> dict:
    """Paired quadratic-group comparison: tune the parallel method's lr by
    grid search per group, run the sequential method at half that lr, and
    emit per-group CSVs, a manifest, and a summary SVG."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {
        "rounds": rounds,
        "local_steps": local_steps,
        "seeds": list(seeds),
        "lr_grid": list(lr_grid),
        "lr_rule": "SFL lr = PFL lr / 2",
        "x0": 0.0,
        "groups": {},
    }
    results = {}
    curves = {}
    for gid in groups:
        task = f"group:{gid}"
        tune_cfg = ExperimentConfig(
            task=task,
            methods=("PFL",),
            rounds=rounds,
            local_steps=local_steps,
            lr_grid=tuple(lr_grid),
            seeds=tuple(seeds),
        )
        best, _ = grid_search(tune_cfg)
        pfl_lr = best["PFL"]
        run_cfg = ExperimentConfig(
            task=task,
            methods=("SFL", "PFL"),
            rounds=rounds,
            local_steps=local_steps,
            lr_grid=(pfl_lr,),
            seeds=tuple(seeds),
            sfl_lr_factor=0.5,
        )
        rows = run_experiment(run_cfg)
        (out / f"group{gid}.csv").write_text(rows_to_csv(rows))
        summary = summarize(rows)
        by_method = {s["method"]: s for s in summary}
        results[gid] = {
            "pfl_lr": pfl_lr,
            "sfl_lr": pfl_lr / 2.0,
            "sfl_final_gap": by_method["SFL"]["mean_final_gap"],
            "pfl_final_gap": by_method["PFL"]["mean_final_gap"],
        }
        manifest["groups"][str(gid)] = results[gid]
        curves[gid] = _mean_curves(rows, rounds)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    if make_plot:
        _plot_groups(curves, out / "summary.svg")
    return results


def _mean_curves(rows: Sequence[MetricRow], rounds: int) -> dict[str, np.ndarray]:
    curves = {}
    for method in ("SFL", "PFL"):
        acc = np.zeros(rounds + 1)
        counts = np.zeros(rounds + 1)
        for r in rows:
            if r.method == method:
                acc[r.round] += r.gap
                counts[r.round] += 1
        with np.errstate(invalid="ignore"):
            curves[method] = acc / np.maximum(counts, 1)
    return curves


def _plot_groups(curves: dict[int, dict[str, np.ndarray]], path: Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    gids = sorted(curves)
    ncols = 5
    nrows = (len(gids) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(3.0 * ncols, 2.4 * nrows), squeeze=False)
    floor = 1e-16
    for i, gid in enumerate(gids):
        ax = axes[i // ncols][i % ncols]
        for method, style in (("PFL", "C0-"), ("SFL", "C1--")):
            y = np.maximum(curves[gid][method], floor)
            ax.plot(np.arange(len(y)), y, style, label=method, lw=1.2)
        ax.set_yscale("log")
        ax.set_title(f"group {gid}", fontsize=9)
        if i == 0:
            ax.legend(fontsize=8)
    for j in range(len(gids), nrows * ncols):
        axes[j // ncols][j % ncols].axis("off")
    fig.suptitle("mean optimality gap per round")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


# ---------------------------------------------------------------------------
# config files


_INT_KEYS = {"rounds", "local_steps", "clients", "participants", "batch", "n", "dim",
             "data_seed", "labels_per_client", "partition_seed"}
_FLOAT_KEYS = {"clip", "sfl_lr_factor", "x0", "reg"}
_HARD_KEYS = {"lam", "lam0", "lam1", "sigma", "zeta", "mu"}


def parse_config(text: str, overrides: Optional[dict[str, str]] = None) -> ExperimentConfig:
    """Parse the flat ``key = value`` experiment grammar.

    Lines starting with '#' are comments.  List values are comma separated.
    ``overrides`` maps keys to raw value strings and wins over the file.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {lineno}: expected 'key = value', got {line!r}")
        raw[key.strip()] = value.strip()
    raw.update(overrides or {})

    kwargs: dict = {}
    hard_params: dict = {}
    for key, value in raw.items():
        if key == "task":
            kwargs["task"] = value
        elif key == "methods":
            kwargs["methods"] = tuple(v.strip().upper() for v in value.split(","))
        elif key == "lr_grid":
            kwargs["lr_grid"] = tuple(float(v) for v in value.split(","))
        elif key == "seeds":
            kwargs["seeds"] = tuple(int(v) for v in value.split(","))
        elif key == "gap_mode":
            kwargs["gap_mode"] = value
        elif key in _INT_KEYS:
            kwargs[key] = int(value)
        elif key in _FLOAT_KEYS:
            kwargs[key] = float(value)
        elif key in _HARD_KEYS:
            hard_params[key] = float(value)
        else:
            raise ValueError(f"unknown config key {key!r}")
    if "task" not in kwargs:
        raise ValueError("config must set 'task'")
    if hard_params:
        kwargs["hard_params"] = hard_params
    return ExperimentConfig(**kwargs)
