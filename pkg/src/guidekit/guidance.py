"""Guiding-space contract and the baseline guidances.

A guiding space turns the current tree into a choice of node to expand plus a
target pose to expand toward. When the choice comes from a tractable
distribution over tree nodes, the distribution is reported alongside so the
evaluation can score it.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .cspace import CSpace, Task
from .searchtree import SearchTree


class Selection(NamedTuple):
    node: int
    target: np.ndarray
    distribution: np.ndarray | None = None


def point_mass(n: int, i: int) -> np.ndarray:
    p = np.zeros(n)
    p[i] = 1.0
    return p


def check_distribution(probs: np.ndarray, n: int, tol: float = 1e-9) -> None:
    if len(probs) != n:
        raise ValueError(f"distribution has length {len(probs)}, tree has {n} nodes")
    if np.any(probs < 0) or abs(float(np.sum(probs)) - 1.0) > tol:
        raise ValueError("distribution is not normalized")


def first_argmin(values: np.ndarray) -> int:
    """Index of the minimum; ties go to the lowest index (np.argmin already does)."""
    return int(np.argmin(values))


class GuidingSpace:
    """Base class. Subclasses implement :meth:`select`; the hooks are no-ops."""

    name = "base"

    def __init__(self, cs: CSpace, task: Task):
        self.cs = cs
        self.task = task
        self.goal = task.goal.as_array()

    def select(self, tree: SearchTree, task: Task, rng: np.random.Generator) -> Selection:
        raise NotImplementedError

    def expand(self, selected: np.ndarray, target: np.ndarray) -> np.ndarray:
        return self.cs.steer(selected, target)

    def on_success(self, tree: SearchTree, new_node: int) -> None:
        pass

    def on_failure(self, tree: SearchTree, node: int, attempted: np.ndarray,
                   invalid_pose: np.ndarray) -> None:
        pass

    def params(self) -> dict:
        return {}


class UniformGuidance(GuidingSpace):
    """Trivial guiding space: every node equally likely, random target."""

    name = "uniform"

    def select(self, tree, task, rng):
        n = len(tree)
        i = int(rng.integers(n))
        return Selection(i, self.cs.sample_uniform(rng), np.full(n, 1.0 / n))


class GoalDistanceGuidance(GuidingSpace):
    """Greedy on C-space distance to the goal, with epsilon-uniform exploration."""

    name = "goal"

    def __init__(self, cs, task, epsilon: float = 0.1):
        super().__init__(cs, task)
        self.epsilon = float(epsilon)

    def heuristic(self, tree: SearchTree) -> np.ndarray:
        return self.cs.distance_many(tree.poses, self.goal)

    def select(self, tree, task, rng):
        n = len(tree)
        best = first_argmin(self.heuristic(tree))
        if rng.random() < self.epsilon:
            i = int(rng.integers(n))
        else:
            i = best
        dist = np.full(n, self.epsilon / n)
        dist[best] += 1.0 - self.epsilon
        return Selection(i, self.goal.copy(), dist)

    def params(self):
        return {"epsilon": self.epsilon}


class VoronoiGuidance(GuidingSpace):
    """RRT's implicit guiding space: nearest node to a uniform C-space sample.

    The induced distribution is proportional to each node's Voronoi volume. It is
    only materialized (by Monte Carlo, on a private generator so the search
    stream is untouched) when ``report_distribution`` is set.
    """

    name = "voronoi"

    def __init__(self, cs, task, n_mc: int = 4096, report_distribution: bool = False,
                 mc_seed: int = 0):
        super().__init__(cs, task)
        self.n_mc = int(n_mc)
        self.report_distribution = report_distribution
        self._mc_rng = np.random.default_rng(mc_seed)

    def nearest(self, tree: SearchTree, q: np.ndarray) -> int:
        return first_argmin(self.cs.distance_many(tree.poses, q))

    def estimate_distribution(self, tree: SearchTree, n_mc: int | None = None,
                              rng: np.random.Generator | None = None) -> np.ndarray:
        n_mc = self.n_mc if n_mc is None else int(n_mc)
        rng = self._mc_rng if rng is None else rng
        n = len(tree)
        if n == 1:
            return np.ones(1)
        counts = np.zeros(n)
        poses = tree.poses
        chunk = max(1, 2_000_000 // n)
        done = 0
        while done < n_mc:
            m = min(chunk, n_mc - done)
            q = self.cs.sample_uniform(rng, m)
            near = np.argmin(self.cs.pairwise_distance(q, poses), axis=1)
            counts += np.bincount(near, minlength=n)
            done += m
        return counts / n_mc

    def select(self, tree, task, rng):
        q = self.cs.sample_uniform(rng)
        i = self.nearest(tree, q)
        dist = self.estimate_distribution(tree) if self.report_distribution else None
        return Selection(i, q, dist)

    def params(self):
        return {"n_mc": self.n_mc}


class ArgminGuidance(GuidingSpace):
    """Shared machinery for strategies that expand the argmin-heuristic node.

    Subclasses provide :meth:`heuristic` (one value per tree node, ``inf`` for
    nodes with no guidance) and :meth:`target_for`. Steering and the local
    planner are deterministic, so repeating an expansion (node, target) either
    fails again or adds a duplicate child; attempted pairs are skipped and the
    next-best node is taken. When
    no node has finite guidance, or the ``max_candidates`` best all lead to
    dead expansions, the iteration falls back to Voronoi selection.
    """

    max_candidates = 64

    def __init__(self, cs, task):
        super().__init__(cs, task)
        self._fallback = VoronoiGuidance(cs, task)
        self._spent: set[tuple] = set()
        self._last = None
        self.fallback_count = 0

    def heuristic(self, tree: SearchTree) -> np.ndarray:
        raise NotImplementedError

    def target_for(self, tree: SearchTree, node: int) -> np.ndarray:
        raise NotImplementedError

    @staticmethod
    def _key(node: int, target: np.ndarray) -> tuple:
        return (int(node),) + tuple(np.asarray(target, dtype=float).tolist())

    def _usable(self, tree, i):
        target = self.target_for(tree, i)
        if self.cs.distance(tree.poses[i], target) <= 1e-12:
            return None
        if self._key(i, target) in self._spent:
            return None
        return target

    def select(self, tree, task, rng):
        n = len(tree)
        h = self.heuristic(tree)
        self._last = None
        if np.isfinite(h).any():
            i = first_argmin(h)
            target = self._usable(tree, i)
            if target is None:
                order = np.argsort(h, kind="stable")[1: self.max_candidates]
                for j in order:
                    if not np.isfinite(h[j]):
                        break
                    target = self._usable(tree, int(j))
                    if target is not None:
                        i = int(j)
                        break
            if target is not None:
                self._last = (self._key(i, target), self.expand(tree.poses[i], target))
                return Selection(i, target, point_mass(n, i))
        self.fallback_count += 1
        sel = self._fallback.select(tree, task, rng)
        return Selection(sel.node, sel.target, point_mass(n, sel.node))

    def _mark_spent(self, node: int, attempted: np.ndarray) -> None:
        # only the expansion this guidance itself proposed is marked
        if self._last is not None:
            key, expected = self._last
            if key[0] == node and np.array_equal(expected, attempted):
                self._spent.add(key)
        self._last = None

    def on_success(self, tree, new_node):
        self._mark_spent(int(tree.parent[new_node]), tree.poses[new_node])

    def on_failure(self, tree, node, attempted, invalid_pose):
        self._mark_spent(node, attempted)
