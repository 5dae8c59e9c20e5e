"""Search tree and the guided-search loop.

Each iteration asks the guiding space for a node and an expansion target,
validates the edge with the local planner and reports the outcome back to the
guiding space, which is how failure-driven strategies update themselves.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .cspace import CSpace, Task, as_pose_array
from .geometry import Pose

if TYPE_CHECKING:
    from .guidance import GuidingSpace


class SearchTree:
    """Rooted tree of poses with parent links and accumulated edge costs."""

    def __init__(self, root, capacity: int = 256):
        self._poses = np.empty((capacity, 3))
        self._parent = np.empty(capacity, dtype=np.int64)
        self._edge = np.empty(capacity)
        self._cost = np.empty(capacity)
        self._depth = np.empty(capacity, dtype=np.int64)
        self._n = 1
        self._poses[0] = as_pose_array(root)
        self._parent[0] = -1
        self._edge[0] = 0.0
        self._cost[0] = 0.0
        self._depth[0] = 0
        self.failed_expansions: list[tuple[int, np.ndarray]] = []

    def __len__(self):
        return self._n

    def _grow(self):
        cap = 2 * len(self._poses)
        for name in ("_poses", "_parent", "_edge", "_cost", "_depth"):
            old = getattr(self, name)
            new = np.empty((cap,) + old.shape[1:], dtype=old.dtype)
            new[: self._n] = old[: self._n]
            setattr(self, name, new)

    def add(self, pose, parent: int, edge_cost: float) -> int:
        if not 0 <= parent < self._n:
            raise IndexError(f"parent {parent} not in tree")
        if self._n == len(self._poses):
            self._grow()
        i = self._n
        self._poses[i] = as_pose_array(pose)
        self._parent[i] = parent
        self._edge[i] = edge_cost
        self._cost[i] = self._cost[parent] + edge_cost
        self._depth[i] = self._depth[parent] + 1
        self._n += 1
        return i

    # read-only views over live nodes
    @property
    def poses(self) -> np.ndarray:
        return self._poses[: self._n]

    @property
    def parent(self) -> np.ndarray:
        return self._parent[: self._n]

    @property
    def edge_cost(self) -> np.ndarray:
        return self._edge[: self._n]

    @property
    def cost_from_root(self) -> np.ndarray:
        return self._cost[: self._n]

    def pose(self, i: int) -> Pose:
        self._check(i)
        return Pose.from_array(self._poses[i])

    @property
    def nodes(self) -> list[Pose]:
        return [Pose.from_array(p) for p in self.poses]

    def _check(self, i: int) -> None:
        if not (isinstance(i, (int, np.integer)) and 0 <= i < self._n):
            raise IndexError(f"node {i} not in tree of size {self._n}")


def extract_path(tree: SearchTree, leaf: int) -> list[Pose]:
    """Root-to-leaf poses."""
    tree._check(leaf)
    chain = []
    i = int(leaf)
    while i >= 0:
        chain.append(i)
        i = int(tree._parent[i])
    return [Pose.from_array(tree._poses[i]) for i in reversed(chain)]


def tree_distance(tree: SearchTree, u: int, v: int) -> float:
    """Length of the tree path between ``u`` and ``v`` (through their LCA)."""
    tree._check(u)
    tree._check(v)
    u, v = int(u), int(v)
    cost, depth, parent = tree._cost, tree._depth, tree._parent
    a, b = u, v
    while depth[a] > depth[b]:
        a = int(parent[a])
    while depth[b] > depth[a]:
        b = int(parent[b])
    while a != b:
        a, b = int(parent[a]), int(parent[b])
    return float(cost[u] + cost[v] - 2.0 * cost[a])


@dataclass
class IterationRecord:
    iteration: int
    selected_node: int
    tree_size: int
    expansion_valid: bool
    new_node: int | None = None
    selection_distribution: np.ndarray | None = None
    attempted: np.ndarray | None = None


@dataclass
class SearchResult:
    tree: SearchTree
    records: list[IterationRecord]
    goal_node: int | None = None
    path: list[Pose] | None = field(default=None)

    @property
    def success(self) -> bool:
        return self.goal_node is not None

    @property
    def iterations(self) -> int:
        return len(self.records)


def guided_search(cs: CSpace, task: Task, guidance: "GuidingSpace", budget: int,
                  rng: np.random.Generator, keep_distributions: bool = False) -> SearchResult:
    """Grow a tree from ``task.start`` under ``guidance`` for at most ``budget``
    iterations.

    The goal is connected (and appended as the final node) as soon as a newly
    added node can see it within the goal horizon. With
    ``keep_distributions`` each record keeps the selection distribution the
    guidance reported, when it reported one.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    start = task.start.as_array()
    goal = task.goal.as_array()
    tree = SearchTree(start)
    records: list[IterationRecord] = []

    def connect_goal(i: int) -> int:
        g = tree.add(goal, i, cs.distance(tree.poses[i], goal))
        return g

    if cs.goal_reached(start, goal):
        g = connect_goal(0)
        records.append(IterationRecord(0, 0, 1, True, g))
        return SearchResult(tree, records, g, extract_path(tree, g))

    goal_node = None
    for it in range(budget):
        n = len(tree)
        sel = guidance.select(tree, task, rng)
        node = int(sel.node)
        if not 0 <= node < n:
            raise RuntimeError(f"guidance selected node {node} outside tree of size {n}")
        dist = sel.distribution
        if dist is not None:
            if len(dist) != n:
                raise RuntimeError("guidance distribution length does not match tree size")
            total = float(np.sum(dist))
            if n == 0 or abs(total - 1.0) > 1e-9:
                raise RuntimeError(f"guidance returned a non-normalized distribution (sum={total})")
        src = tree.poses[node].copy()
        new = np.asarray(guidance.expand(src, sel.target), dtype=float)
        rec = IterationRecord(it, node, n, False,
                              selection_distribution=dist if keep_distributions else None,
                              attempted=new)
        lp = cs.local_plan(src, new)
        if lp.valid:
            i = tree.add(new, node, cs.distance(src, new))
            rec.expansion_valid = True
            rec.new_node = i
            guidance.on_success(tree, i)
            records.append(rec)
            if cs.goal_reached(new, goal):
                goal_node = connect_goal(i)
                break
        else:
            tree.failed_expansions.append((node, new))
            bad = cs.interpolate(src, new, lp.invalid_at)
            guidance.on_failure(tree, node, new, bad)
            records.append(rec)
    path = extract_path(tree, goal_node) if goal_node is not None else None
    return SearchResult(tree, records, goal_node, path)


TRACE_COLUMNS = ["iteration", "selected_node", "valid", "new_x", "new_y", "new_theta",
                 "selected_prob", "se"]


def write_trace(path, result: SearchResult, se: np.ndarray | None = None) -> None:
    """One CSV row per iteration; ``selected_prob`` is blank when the guidance
    did not report a distribution."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for k, r in enumerate(result.records):
            if r.new_node is not None:
                x, y, th = (repr(float(v)) for v in result.tree.poses[r.new_node])
            else:
                x = y = th = ""
            prob = ""
            if r.selection_distribution is not None:
                prob = repr(float(r.selection_distribution[r.selected_node]))
            s = "" if se is None else repr(float(se[k]))
            w.writerow([r.iteration, r.selected_node, int(r.expansion_valid), x, y, th, prob, s])
