"""Experiment runner: seeds -> searches -> sampling-efficiency curves.

Each seed owns two independent random streams spawned from
``SeedSequence([base_seed, seed_index])``: one for randomized guidance
construction (roadmaps) and one for the search itself. Seeds may run in a
worker pool; results are always reduced in seed order so the aggregate files
are bit-identical across runs and worker counts.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from ..cspace import CSpace, Task
from ..evalmetric import DEFAULT_GRID, METRIC_MODES, cached_oracle, evaluate_run
from ..searchtree import guided_search, write_trace
from ..strategies import make_guidance, validate_strategy
from ..strategies.pathdb import PathDatabase
from .catalog import get_environment
from .plot import write_se_svg

log = logging.getLogger(__name__)

AGGREGATE_COLUMNS = ["iteration", "mean_se", "stderr", "success_fraction"]


def cache_dir() -> Path:
    """Oracle cache directory: ``$GUIDEKIT_CACHE`` or ``~/.cache/guidekit``."""
    env = os.environ.get("GUIDEKIT_CACHE")
    return Path(env) if env else Path.home() / ".cache" / "guidekit"


def seed_streams(base_seed: int, index: int) -> tuple[np.random.Generator, np.random.Generator]:
    build, search = np.random.SeedSequence([base_seed, index]).spawn(2)
    return np.random.Generator(np.random.Philox(build)), np.random.Generator(np.random.Philox(search))


@dataclass
class ExperimentConfig:
    env: str
    strategy: str
    seeds: int = 128
    budget: int = 5000
    metric: str = "nll"
    eps: float = 1e-4
    delta: float = 0.1
    tau: float = 0.1
    normalize: str = "minmax"
    params: dict = field(default_factory=dict)   # per-strategy knobs, e.g. {"lazyprm": {...}}
    out: str | None = None
    grid: tuple = DEFAULT_GRID
    base_seed: int = 0
    jobs: int = 1
    db_path: str | None = None
    write_traces: bool = True

    def validate(self) -> None:
        validate_strategy(self.strategy)
        get_environment(self.env, seed=0)
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if self.budget < 1:
            raise ValueError("budget must be >= 1")
        if self.metric not in METRIC_MODES:
            raise ValueError(f"unknown metric {self.metric!r}; valid: {', '.join(METRIC_MODES)}")
        for name in ("eps", "delta", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.eps >= 1:
            raise ValueError("eps must be < 1")
        if "pathdb" in self.strategy and self.db_path is None:
            raise ValueError("pathdb strategy needs db_path")


@dataclass
class SeedResult:
    index: int
    se: np.ndarray
    success: bool
    iterations: int
    search_seconds: float
    eval_seconds: float
    fallback: int = 0

    @property
    def whole_run_se(self) -> float:
        return float(self.se.mean()) if len(self.se) else 0.0


@dataclass
class RunSummary:
    config: dict
    params: dict
    mean_se: np.ndarray           # (budget,), post-success iterations count 0
    stderr: np.ndarray
    success_fraction: np.ndarray
    success_rate: float
    samples_to_goal: np.ndarray   # per seed; failures count the full budget
    whole_run_se: np.ndarray      # per seed, mean over executed iterations
    wall_clock: dict
    seeds: list[SeedResult] = field(repr=False, default_factory=list)

    @property
    def mean_samples_to_goal(self) -> float:
        return float(self.samples_to_goal.mean())

    def curve_argmax(self) -> int:
        return int(np.argmax(self.mean_se))

    def to_json(self) -> dict:
        return {
            "config": self.config,
            "params": self.params,
            "success_rate": self.success_rate,
            "mean_samples_to_goal": self.mean_samples_to_goal,
            "samples_to_goal": self.samples_to_goal.tolist(),
            "whole_run_se": self.whole_run_se.tolist(),
            "mean_whole_run_se": float(self.whole_run_se.mean()),
            "curve_argmax": self.curve_argmax(),
            "wall_clock": self.wall_clock,
        }


def _instance(config: ExperimentConfig, index: int) -> tuple[CSpace, Task]:
    # randomized families draw one instance per seed
    return get_environment(config.env, seed=config.base_seed * 100003 + index).build()


def run_seed(config: ExperimentConfig, index: int, oracle=None, db: PathDatabase | None = None,
             trace_dir: Path | None = None) -> SeedResult:
    cs, task = _instance(config, index)
    if oracle is None:
        oracle = cached_oracle(cs, task.goal, tuple(config.grid), cache_dir())
    build_rng, search_rng = seed_streams(config.base_seed, index)
    t0 = time.perf_counter()
    guidance = make_guidance(config.strategy, cs, task, build_rng, config.params, db)
    if config.metric != "nll" and hasattr(guidance, "report_distribution"):
        guidance.report_distribution = True
    result = guided_search(cs, task, guidance, config.budget, search_rng,
                           keep_distributions=config.metric != "nll")
    t1 = time.perf_counter()
    se = evaluate_run(result, task, oracle, mode=config.metric, delta_temp=config.delta,
                      tau_temp=config.tau, eps=config.eps, normalize=config.normalize)
    t2 = time.perf_counter()
    if trace_dir is not None:
        write_trace(trace_dir / f"trace_seed{index:04d}.csv", result, se)
    return SeedResult(index, se, result.success, result.iterations, t1 - t0, t2 - t1,
                      int(getattr(guidance, "fallback_count", 0)))


def strategy_params(config: ExperimentConfig) -> dict:
    """Every knob the run uses, defaults included, for the run header."""
    cs, task = _instance(config, 0)
    build_rng, _ = seed_streams(config.base_seed, 0)
    db = PathDatabase.load(config.db_path) if config.db_path else None
    g = make_guidance(config.strategy, cs, task, build_rng, config.params, db)
    return {"cspace": cs.params(), "strategy": g.params(),
            "evaluation": {"metric": config.metric, "eps": config.eps, "delta": config.delta,
                           "tau": config.tau, "normalize": config.normalize,
                           "grid": list(config.grid)}}


def aggregate(results: list[SeedResult], budget: int, eps: float) -> tuple[np.ndarray, ...]:
    """Per-iteration mean, stderr and success fraction over seeds.

    A seed that reached the goal contributes 0 to every later iteration.
    """
    s = len(results)
    m = np.zeros((s, budget))
    done = np.zeros((s, budget), dtype=bool)
    for r, res in enumerate(results):
        m[r, : len(res.se)] = res.se
        if res.success:
            done[r, len(res.se) - 1:] = True
    mean = m.mean(axis=0)
    stderr = m.std(axis=0, ddof=1) / math.sqrt(s) if s > 1 else np.zeros(budget)
    bound = math.log(1.0 / eps)
    if mean.min() < -1e-12 or mean.max() > bound + 1e-9:
        raise AssertionError("aggregate sampling efficiency outside [0, ln(1/eps)]")
    return mean, stderr, done.mean(axis=0)


def write_aggregate(path, mean, stderr, success) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(AGGREGATE_COLUMNS)
        for k in range(len(mean)):
            w.writerow([k, repr(float(mean[k])), repr(float(stderr[k])), repr(float(success[k]))])


def read_aggregate(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) for r in rows]) for c in AGGREGATE_COLUMNS}


def run_experiment(config: ExperimentConfig) -> RunSummary:
    """Run every seed, write the trace/aggregate/SVG/summary files when
    ``config.out`` is set, and return the summary."""
    config.validate()
    params = strategy_params(config)
    log.info("run %s on %s: seeds=%d budget=%d base_seed=%d params=%s", config.strategy,
             config.env, config.seeds, config.budget, config.base_seed, json.dumps(params))
    out = Path(config.out) if config.out else None
    trace_dir = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        if config.write_traces:
            trace_dir = out / "traces"
            trace_dir.mkdir(exist_ok=True)
    db = PathDatabase.load(config.db_path) if config.db_path else None
    shared_oracle = None
    if not config.env.startswith("random_"):
        cs, task = _instance(config, 0)
        shared_oracle = cached_oracle(cs, task.goal, tuple(config.grid), cache_dir())

    t0 = time.perf_counter()
    if config.jobs == 1:
        results = [run_seed(config, i, shared_oracle, db, trace_dir) for i in range(config.seeds)]
    else:
        results = Parallel(n_jobs=config.jobs)(
            delayed(run_seed)(config, i, shared_oracle, db, trace_dir) for i in range(config.seeds))
    results.sort(key=lambda r: r.index)
    total = time.perf_counter() - t0

    mean, stderr, success = aggregate(results, config.budget, config.eps)
    search_t = np.array([r.search_seconds for r in results])
    summary = RunSummary(
        config=_config_dict(config),
        params=params,
        mean_se=mean,
        stderr=stderr,
        success_fraction=success,
        success_rate=float(np.mean([r.success for r in results])),
        samples_to_goal=np.array([r.iterations if r.success else config.budget for r in results], dtype=float),
        whole_run_se=np.array([r.whole_run_se for r in results]),
        wall_clock={"total_seconds": total, "mean_search_seconds": float(search_t.mean()),
                    "max_search_seconds": float(search_t.max()),
                    "mean_eval_seconds": float(np.mean([r.eval_seconds for r in results]))},
        seeds=results,
    )
    log.info("done %s on %s: success %.3f, mean samples-to-goal %.1f, whole-run SE %.4f",
             config.strategy, config.env, summary.success_rate, summary.mean_samples_to_goal,
             float(summary.whole_run_se.mean()))
    if out is not None:
        write_aggregate(out / "aggregate.csv", mean, stderr, success)
        write_se_svg(out / "se.svg", [(f"{config.strategy} / {config.env}", mean, stderr)],
                     title=f"{config.strategy} on {config.env} ({config.seeds} seeds)")
        (out / "summary.json").write_text(json.dumps(summary.to_json(), indent=1) + "\n")
    return summary


def _config_dict(config: ExperimentConfig) -> dict:
    d = asdict(config)
    d["grid"] = list(config.grid)
    return d
