"""Experience-based guidance from a database of solved paths.

The entry whose task is most similar (start-to-start plus goal-to-goal
distance) is queried; each tree node is scored by its distance to the
nearest waypoint on that path plus the path length remaining from there.
Failed expansions filter out every entry passing near the colliding pose, and
the query is repeated among the survivors. While no node can see the queried
path, selection falls back to Voronoi (RRT) sampling.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ..cspace import CSpace, Task
from ..geometry import Pose
from ..guidance import ArgminGuidance, VoronoiGuidance
from ..searchtree import guided_search

log = logging.getLogger(__name__)


@dataclass
class PathEntry:
    start: np.ndarray
    goal: np.ndarray
    waypoints: np.ndarray     # (W, 3)
    length: float
    env_seed: int | None = None

    def to_json(self) -> dict:
        return {"start": self.start.tolist(), "goal": self.goal.tolist(),
                "waypoints": self.waypoints.tolist(), "length": self.length,
                "env_seed": self.env_seed}

    @classmethod
    def from_json(cls, d: dict) -> "PathEntry":
        return cls(np.asarray(d["start"], dtype=float), np.asarray(d["goal"], dtype=float),
                   np.asarray(d["waypoints"], dtype=float).reshape(-1, 3), float(d["length"]),
                   d.get("env_seed"))


class PathDatabase:
    def __init__(self, entries: list[PathEntry]):
        self.entries = list(entries)

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    def subset(self, n: int) -> "PathDatabase":
        return PathDatabase(self.entries[:n])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps([e.to_json() for e in self.entries]))

    @classmethod
    def load(cls, path) -> "PathDatabase":
        return cls([PathEntry.from_json(d) for d in json.loads(Path(path).read_text())])


def path_length(cs: CSpace, waypoints: np.ndarray) -> float:
    if len(waypoints) < 2:
        return 0.0
    return float(cs.rowwise_distance(waypoints[:-1], waypoints[1:]).sum())


def shortcut_smooth(cs: CSpace, waypoints: np.ndarray, attempts: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Random shortcutting: join two random waypoints directly when the local
    planner allows it. Never lengthens the path (triangle inequality)."""
    w = [np.asarray(p, dtype=float) for p in waypoints]
    for _ in range(attempts):
        if len(w) < 3:
            break
        i, j = sorted(rng.choice(len(w), size=2, replace=False))
        if j - i < 2:
            continue
        if cs.local_plan(w[i], w[j]).valid:
            del w[i + 1: j]
    return np.array(w)


def db_build(env_generator: Callable[[int], tuple[CSpace, Task]], n_entries: int,
             rng: np.random.Generator, budget: int = 20000, smooth_attempts: int = 500,
             keep_raw_length: bool = False) -> PathDatabase:
    """Solve generated problems with Voronoi guidance and store smoothed paths.

    Unsolved instances are skipped; more than ``10 * n_entries`` attempts
    raise ``RuntimeError``.
    """
    if n_entries < 1:
        raise ValueError("n_entries must be >= 1")
    entries = []
    attempts = 0
    while len(entries) < n_entries:
        if attempts >= 10 * n_entries:
            raise RuntimeError(f"generator unsolvable: {len(entries)}/{n_entries} after {attempts} attempts")
        attempts += 1
        seed = int(rng.integers(2**31 - 1))
        cs, task = env_generator(seed)
        res = guided_search(cs, task, VoronoiGuidance(cs, task), budget, rng)
        if not res.success:
            log.info("db_build: env seed %d unsolved in %d iterations", seed, budget)
            continue
        raw = np.array([p.as_array() for p in res.path])
        smooth = shortcut_smooth(cs, raw, smooth_attempts, rng)
        e = PathEntry(task.start.as_array(), task.goal.as_array(), smooth, path_length(cs, smooth), seed)
        if keep_raw_length:
            e.raw_length = path_length(cs, raw)
        entries.append(e)
    return PathDatabase(entries)


def densify(cs: CSpace, waypoints: np.ndarray, spacing: float) -> np.ndarray:
    out = [waypoints[0]]
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        n = max(1, int(math.ceil(cs.distance(a, b) / spacing - 1e-12)))
        out.extend(cs.interpolate(a, b, np.arange(1, n + 1) / n))
    return np.array(out)


class PathDatabaseGuidance(ArgminGuidance):
    """h(v) = d(v, nearest waypoint w of the queried path) + path length after w."""

    name = "pathdb"

    def __init__(self, cs, task, db: PathDatabase, r_filter: float | None = None):
        super().__init__(cs, task)
        if len(db) == 0:
            raise ValueError("empty path database")
        self.db = db
        self.r_filter = 2.0 * cs.step_size if r_filter is None else float(r_filter)
        self.alive = np.ones(len(db), dtype=bool)
        self._dense = [densify(cs, e.waypoints, cs.step_size) for e in db.entries]
        self._start = task.start.as_array()
        self.query_times: list[float] = []
        self.filtered_count = 0
        self.query_index: int | None = None
        self._wnear = np.zeros(0, dtype=np.int64)
        self._dnear = np.zeros(0)
        self._visible: dict[int, bool] = {}
        self._requery()

    def params(self):
        return {"r_filter": self.r_filter, "db_size": len(self.db)}

    def query(self) -> int | None:
        """Linear scan for the most similar alive task (ties: lowest index)."""
        t0 = time.perf_counter()
        best, best_d = None, math.inf
        s, g = self._start, self.goal
        tw = self.cs.theta_weight
        for i, e in enumerate(self.db.entries):
            if not self.alive[i]:
                continue
            ds = math.hypot(e.start[0] - s[0], e.start[1] - s[1]) + \
                tw * abs((e.start[2] - s[2] + math.pi) % (2 * math.pi) - math.pi)
            dg = math.hypot(e.goal[0] - g[0], e.goal[1] - g[1]) + \
                tw * abs((e.goal[2] - g[2] + math.pi) % (2 * math.pi) - math.pi)
            if ds + dg < best_d:
                best, best_d = i, ds + dg
        self.query_times.append(time.perf_counter() - t0)
        return best

    def _requery(self, tree=None):
        self.query_index = self.query()
        self._visible = {}
        if self.query_index is None:
            self._path = None
            return
        path = self._dense[self.query_index]
        seg = self.cs.rowwise_distance(path[:-1], path[1:])
        self._path = path
        self._remaining = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        n = 0 if tree is None else len(tree)
        self._wnear = np.zeros(0, dtype=np.int64)
        self._dnear = np.zeros(0)
        if tree is not None:
            self._sync(tree)
        assert len(self._wnear) == n

    def _sync(self, tree):
        n = len(tree)
        if self._path is None or len(self._wnear) >= n:
            return
        d = self.cs.pairwise_distance(tree.poses[len(self._wnear):n], self._path)
        j = np.argmin(d, axis=1)
        self._wnear = np.concatenate([self._wnear, j])
        self._dnear = np.concatenate([self._dnear, d[np.arange(len(j)), j]])

    def heuristic(self, tree):
        if self._path is None:
            return np.full(len(tree), np.inf)
        self._sync(tree)
        n = len(tree)
        return self._dnear[:n] + self._remaining[self._wnear[:n]]

    def visible(self, tree, node: int) -> bool:
        """Can ``node`` locally plan to its nearest waypoint on the queried path?"""
        v = self._visible.get(node)
        if v is None:
            w = self._path[self._wnear[node]]
            v = self._dnear[node] <= 1e-12 or self.cs.local_plan(tree.poses[node], w).valid
            self._visible[node] = v
        return v

    def _usable(self, tree, i):
        if not self.visible(tree, i):
            return None
        return super()._usable(tree, i)

    def target_for(self, tree, node):
        w = int(self._wnear[node])
        return self._path[min(w + 1, len(self._path) - 1)].copy()

    def on_success(self, tree, new_node):
        super().on_success(tree, new_node)
        self._sync(tree)

    def on_failure(self, tree, node, attempted, invalid_pose):
        super().on_failure(tree, node, attempted, invalid_pose)
        hit = np.zeros(len(self.db), dtype=bool)
        for i in np.flatnonzero(self.alive):
            if self.cs.distance_many(self._dense[i], invalid_pose).min() <= self.r_filter:
                hit[i] = True
        if not hit.any():
            return
        self.alive[hit] = False
        self.filtered_count += int(hit.sum())
        if self.query_index is not None and hit[self.query_index]:
            self._requery(tree)


def entry_from_path(cs: CSpace, task: Task, path: list[Pose], env_seed=None) -> PathEntry:
    wp = np.array([p.as_array() for p in path])
    return PathEntry(task.start.as_array(), task.goal.as_array(), wp, path_length(cs, wp), env_seed)
