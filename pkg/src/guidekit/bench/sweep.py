"""Path-database size sweep on the randomized passage family."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..evalmetric import DEFAULT_GRID, cached_oracle, evaluate_run
from ..guidance import UniformGuidance
from ..searchtree import guided_search
from ..strategies.pathdb import PathDatabase, PathDatabaseGuidance, db_build
from .catalog import random_simple_passage_env
from .runner import cache_dir, seed_streams

log = logging.getLogger(__name__)

DEFAULT_SIZES = (1, 4, 16, 64, 256)
# evaluation instances are drawn from a seed range disjoint from database builds
EVAL_SEED_OFFSET = 1_000_000_000


@dataclass
class SweepPoint:
    size: int
    whole_run_se: np.ndarray        # per seed
    success: np.ndarray             # per seed
    samples_to_goal: np.ndarray
    query_seconds: float            # median linear-scan query time
    filtered: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def to_json(self) -> dict:
        return {"size": self.size, "mean_whole_run_se": float(self.whole_run_se.mean()),
                "whole_run_se": self.whole_run_se.tolist(), "success_rate": float(self.success.mean()),
                "mean_samples_to_goal": float(self.samples_to_goal.mean()),
                "query_seconds": self.query_seconds, "mean_filtered": float(self.filtered.mean())}


def build_database(n_entries: int, seed: int = 0, budget: int = 20000,
                   smooth_attempts: int = 500) -> PathDatabase:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 7])))
    return db_build(random_simple_passage_env, n_entries, rng, budget, smooth_attempts)


def time_query(db: PathDatabase, repeats: int = 2000, rounds: int = 5) -> float:
    """Best-of-rounds mean time of one query over the full database."""
    cs, task = random_simple_passage_env(EVAL_SEED_OFFSET)
    g = PathDatabaseGuidance(cs, task, db)
    best = np.inf
    for _ in range(rounds):
        t0 = time.perf_counter()
        for _ in range(repeats):
            g.query()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return float(best)


def run_pathdb_sweep(db_sizes=DEFAULT_SIZES, seeds: int = 64, budget: int = 5000,
                     db: PathDatabase | None = None, db_seed: int = 0, base_seed: int = 0,
                     eps: float = 1e-4, delta: float = 0.1, tau: float = 0.1,
                     normalize: str = "minmax", grid=DEFAULT_GRID, baseline: bool = False,
                     r_filter: float | None = None, out=None) -> list[SweepPoint]:
    """Evaluate pathdb guidance for each database size on fresh instances.

    Databases of different sizes are nested prefixes of one build, so a
    larger database always contains the smaller ones. Every size sees the
    same evaluation instances and search streams. ``r_filter`` defaults to
    the guidance's own default (2 * step_size).
    """
    sizes = [int(s) for s in db_sizes]
    if not sizes or min(sizes) < 1:
        raise ValueError("database sizes must be >= 1")
    if db is None:
        db = build_database(max(sizes), db_seed)
    if len(db) < max(sizes):
        raise ValueError(f"database has {len(db)} entries, sweep needs {max(sizes)}")
    log.info("pathdb sweep: sizes=%s seeds=%d budget=%d eps=%g delta=%g tau=%g normalize=%s "
             "grid=%s r_filter=%s", sizes, seeds, budget, eps, delta, tau, normalize, list(grid),
             "2*step_size" if r_filter is None else r_filter)
    instances = [random_simple_passage_env(EVAL_SEED_OFFSET + base_seed * 100003 + i) for i in range(seeds)]
    oracles = [cached_oracle(cs, task.goal, tuple(grid), cache_dir()) for cs, task in instances]
    points = []
    for size in sizes:
        sub = db.subset(size)
        se, ok, stg, filt = [], [], [], []
        for i, ((cs, task), field_) in enumerate(zip(instances, oracles)):
            _, rng = seed_streams(base_seed, i)
            g = PathDatabaseGuidance(cs, task, sub, r_filter)
            res = guided_search(cs, task, g, budget, rng)
            s = evaluate_run(res, task, field_, delta_temp=delta, tau_temp=tau, eps=eps,
                             normalize=normalize)
            se.append(float(s.mean()))
            ok.append(res.success)
            stg.append(res.iterations if res.success else budget)
            filt.append(g.filtered_count)
        p = SweepPoint(size, np.array(se), np.array(ok), np.array(stg, dtype=float),
                       time_query(sub), np.array(filt, dtype=float))
        log.info("size %d: whole-run SE %.4f success %.3f query %.2e s", size,
                 p.whole_run_se.mean(), p.success.mean(), p.query_seconds)
        points.append(p)
    base = None
    if baseline:
        succ = []
        for i, (cs, task) in enumerate(instances):
            _, rng = seed_streams(base_seed, i)
            succ.append(guided_search(cs, task, UniformGuidance(cs, task), budget, rng).success)
        base = float(np.mean(succ))
    if out is not None:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.json").write_text(json.dumps(
            {"sizes": sizes, "seeds": seeds, "budget": budget, "r_filter": r_filter,
             "points": [p.to_json() for p in points],
             "uniform_success_rate": base}, indent=1) + "\n")
        write_sweep_csv(out / "sweep.csv", points)
    return points


def write_sweep_csv(path, points: list[SweepPoint]) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["size", "mean_whole_run_se", "stderr", "success_rate", "query_seconds"])
        for p in points:
            n = len(p.whole_run_se)
            err = p.whole_run_se.std(ddof=1) / np.sqrt(n) if n > 1 else 0.0
            w.writerow([p.size, repr(float(p.whole_run_se.mean())), repr(float(err)),
                        repr(float(p.success.mean())), repr(p.query_seconds)])
