"""Solver dispatch and benchmark reports shared by the command line."""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from . import oracle, trainer
from .autodiff import ParameterStore
from .factor_graph import COPInstance, load_instance
from .model import DABPModel, ModelConfig

ALGORITHMS = ("bp", "dbp", "dbp-scfg", "dabp", "dabp-heter", "dabp-homo", "exact")
CONVERGENCE_LIMITS = (125, 250, 500, 1000)
WORKERS_ENV = "ATTENTIVE_BP_WORKERS"

_MODE = {"dabp": "full", "dabp-heter": "heter_lambda", "dabp-homo": "homo_lambda"}


@dataclass
class SolveOptions:
    lam: float = 0.9
    rho: float = 0.95
    train: trainer.TrainConfig = field(default_factory=trainer.TrainConfig)
    hidden: int = 8
    gat_layers: int = 4
    att_heads: int = 4
    load_model: str | None = None
    save_model: str | None = None
    exact_cap: int = oracle.DEFAULT_CAP


def solve(instance: COPInstance, algo: str, opts: SolveOptions,
          sink: Callable | None = None) -> trainer.RunTrace:
    """Run one algorithm on one instance and return its trace."""
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
    if algo in trainer.BASELINES:
        return trainer.run_baseline(instance, algo, opts.train, lam=opts.lam, rho=opts.rho, sink=sink)
    if algo == "exact":
        start = time.perf_counter()
        res = oracle.solve_exact(instance, cap=opts.exact_cap)
        trace = trainer.RunTrace("exact", instance.num_functions, best_assignment=res.assignment,
                                 best_cost=res.cost)
        trace.wall_time = time.perf_counter() - start
        return trace
    dmax = max(instance.domains) if instance.domains else 1
    if opts.load_model:
        params = ParameterStore.load(opts.load_model)
        width = params["gru_v2f.W_z"].shape[0]
        cfg = ModelConfig(hidden=opts.hidden, gat_layers=opts.gat_layers, att_heads=opts.att_heads,
                          msg_width=width, mode=_MODE[algo])
        model = DABPModel(cfg, params)
    else:
        cfg = ModelConfig(hidden=opts.hidden, gat_layers=opts.gat_layers, att_heads=opts.att_heads,
                          msg_width=dmax, mode=_MODE[algo])
        model = DABPModel(cfg, seed=opts.train.seed)
    _, trace = trainer.run_online(instance, model, opts.train, sink=sink, algo=algo)
    if opts.save_model:
        model.params.save(opts.save_model)
    return trace


@dataclass
class BenchRow:
    instance_id: str
    algo: str
    best_cost: float
    normalized_cost: float
    gap: float
    converged_at: int | None
    wall_time: float
    error: str = ""


@dataclass
class BenchReport:
    """Per-instance rows plus per-algorithm aggregates.

    Normalised cost divides by the function count of the original
    (unsplit) instance.  Gap is ``(cost - best) / best`` where ``best`` is
    the lowest value among the compared algorithms.
    """

    rows: list[BenchRow]
    algos: list[str]
    num_instances: int
    limits: tuple[int, ...] = CONVERGENCE_LIMITS

    def aggregates(self) -> list[dict]:
        means = {}
        for algo in self.algos:
            vals = [r.normalized_cost for r in self.rows if r.algo == algo and not r.error]
            means[algo] = sum(vals) / len(vals) if vals else math.nan
        finite = [m for m in means.values() if math.isfinite(m)]
        best = min(finite) if finite else math.nan
        out = []
        for algo in self.algos:
            entry = {"algo": algo, "mean_normalized_cost": means[algo],
                     "gap": _gap(means[algo], best)}
            for limit, frac in self.convergence(algo).items():
                entry[f"converged@{limit}"] = frac
            out.append(entry)
        return out

    def convergence(self, algo: str) -> dict[int, float]:
        """Fraction of instances whose messages converged within each iteration limit."""
        rows = [r for r in self.rows if r.algo == algo]
        total = len(rows) or 1
        return {limit: sum(1 for r in rows if r.converged_at is not None and r.converged_at <= limit) / total
                for limit in self.limits}

    def write(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        fields = ["instance_id", "algo", "best_cost", "normalized_cost", "gap", "converged_at",
                  "wall_time", "error"]
        with open(out / "rows.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(fields)
            for r in self.rows:
                w.writerow([r.instance_id, r.algo, _fmt(r.best_cost), _fmt(r.normalized_cost), _fmt(r.gap),
                            "" if r.converged_at is None else r.converged_at, f"{r.wall_time:.3f}", r.error])
        agg = self.aggregates()
        with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            keys = list(agg[0]) if agg else ["algo"]
            w.writerow(keys)
            for entry in agg:
                w.writerow([entry[k] if isinstance(entry[k], str) else _fmt(entry[k]) for k in keys])


def _gap(value: float, best: float) -> float:
    if not (math.isfinite(value) and math.isfinite(best)):
        return math.nan
    if best == 0:
        return 0.0 if value == 0 else math.inf
    return (value - best) / abs(best)


def _fmt(x: float) -> str:
    return format(x, ".10g") if isinstance(x, float) else str(x)


def read_manifest(path: str | Path) -> list[tuple[str, Path]]:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    return [(entry["id"], path.parent / entry["path"]) for entry in doc["instances"]]


def _bench_one(args) -> list[BenchRow]:
    instance_id, file, algos, opts = args
    rows = []
    try:
        instance = load_instance(file)
    except Exception as exc:  # recorded, the batch continues
        return [BenchRow(instance_id, a, math.nan, math.nan, math.nan, None, 0.0, f"load: {exc}") for a in algos]
    for algo in algos:
        try:
            trace = solve(instance, algo, opts)
            rows.append(BenchRow(instance_id, algo, trace.best_cost, trace.normalized_cost, math.nan,
                                 trace.converged_at, trace.wall_time))
        except Exception as exc:
            rows.append(BenchRow(instance_id, algo, math.nan, math.nan, math.nan, None, 0.0, str(exc)))
    # per-instance gap against the best compared algorithm
    finite = [r.best_cost for r in rows if math.isfinite(r.best_cost)]
    best = min(finite) if finite else math.nan
    for r in rows:
        r.gap = _gap(r.best_cost, best)
    return rows


def run_bench(manifest: str | Path, algos: list[str], opts: SolveOptions,
              workers: int | None = None) -> BenchReport:
    """Run every algorithm on every manifest instance; row order follows the manifest."""
    for a in algos:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}; choose from {ALGORITHMS}")
    entries = read_manifest(manifest)
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    jobs = [(iid, file, algos, opts) for iid, file in entries]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_bench_one, jobs))
    else:
        results = [_bench_one(job) for job in jobs]
    rows = [row for chunk in results for row in chunk]
    return BenchReport(rows, list(algos), len(entries))
