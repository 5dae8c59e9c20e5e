"""Lazy roadmap guidance.

A PRM whose vertices are collision-checked but whose edges are not. Tree
nodes are ranked by the lazy shortest-path length to the goal from their
nearest roadmap vertex; failed expansions delete roadmap vertices near the
colliding pose, so the lazy path reroutes as the tree learns about obstacles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from ..cspace import CSpace, Task
from ..guidance import ArgminGuidance


@dataclass
class LazyRoadmap:
    vertices: np.ndarray      # (V, 3)
    edges: np.ndarray         # (E, 2) vertex indices, undirected
    lengths: np.ndarray       # (E,)
    alive: np.ndarray         # (V,) bool
    start_vertex: int = 0
    goal_vertex: int = 1
    edge_alive: np.ndarray | None = None   # (E,) bool; edges can die on their own

    def __post_init__(self):
        if self.edge_alive is None:
            self.edge_alive = np.ones(len(self.edges), dtype=bool)

    def __len__(self):
        return len(self.vertices)

    def alive_edges(self) -> np.ndarray:
        return self.edge_alive & self.alive[self.edges[:, 0]] & self.alive[self.edges[:, 1]]

    def edges_near(self, cs: CSpace, pose: np.ndarray, radius: float) -> np.ndarray:
        """Alive edges whose straight segment passes within ``radius`` of ``pose``
        (checked at edge-resolution spacing)."""
        m = np.flatnonzero(self.alive_edges())
        if len(m) == 0:
            return m
        a = self.vertices[self.edges[m, 0]]
        b = self.vertices[self.edges[m, 1]]
        # cheap prefilter: the segment lies within len/2 of its midpoint in (x, y)
        mid = 0.5 * (a[:, :2] + b[:, :2])
        half = 0.5 * self.lengths[m]
        close = np.hypot(*(mid - pose[:2]).T) <= half + radius
        m, a, b = m[close], a[close], b[close]
        if len(m) == 0:
            return m
        k = max(2, int(np.ceil(self.lengths[m].max() / cs.edge_resolution)) + 1)
        ts = np.linspace(0.0, 1.0, k)
        dth = np.mod(b[:, 2] - a[:, 2] + np.pi, 2 * np.pi) - np.pi
        pts = np.empty((len(m), k, 3))
        pts[..., :2] = a[:, None, :2] + ts[None, :, None] * (b[:, None, :2] - a[:, None, :2])
        pts[..., 2] = a[:, None, 2] + ts[None, :] * dth[:, None]
        d = cs.distance_many(pts.reshape(-1, 3), pose).reshape(len(m), k)
        return m[d.min(axis=1) <= radius]

    def shortest_to_goal(self) -> tuple[np.ndarray, np.ndarray]:
        """Dijkstra from the goal vertex over the alive subgraph.

        Returns ``(dist, pred)``; ``pred[v]`` is the next vertex from ``v``
        toward the goal (-9999 where undefined).
        """
        v = len(self.vertices)
        m = self.alive_edges()
        e = self.edges[m]
        g = sparse.csr_matrix((self.lengths[m], (e[:, 0], e[:, 1])), shape=(v, v))
        if not self.alive[self.goal_vertex]:
            return np.full(v, np.inf), np.full(v, -9999)
        dist, pred = csgraph.dijkstra(g, directed=False, indices=self.goal_vertex,
                                      return_predecessors=True)
        dist[~self.alive] = np.inf
        return dist, pred

    def components(self) -> np.ndarray:
        v = len(self.vertices)
        m = self.alive_edges()
        e = self.edges[m]
        g = sparse.csr_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(v, v))
        return csgraph.connected_components(g, directed=False)[1]


def lazy_build(cs: CSpace, task: Task, n_vertices: int = 300, k_neighbors: int = 8,
               rng: np.random.Generator | None = None, check_vertices: bool = True) -> LazyRoadmap:
    """Roadmap of ``n_vertices`` samples plus start (index 0) and goal
    (index 1), each joined to its ``k_neighbors`` nearest vertices.

    Edges are never checked. Vertices are valid samples unless
    ``check_vertices`` is off, in which case the roadmap knows nothing of the
    obstacles at all.
    """
    if n_vertices < 2:
        raise ValueError("n_vertices must be >= 2")
    rng = np.random.default_rng() if rng is None else rng
    if check_vertices:
        samples = cs.sample_valid(rng, n_vertices, max_attempts=100 * n_vertices)
    else:
        samples = cs.sample_uniform(rng, n_vertices)
    verts = np.vstack([task.start.as_array(), task.goal.as_array(), samples])
    d = cs.pairwise_distance(verts, verts)
    np.fill_diagonal(d, np.inf)
    k = min(k_neighbors, len(verts) - 1)
    nbr = np.argpartition(d, k - 1, axis=1)[:, :k] if k < len(verts) - 1 else \
        np.argsort(d, axis=1, kind="stable")[:, :k]
    a = np.repeat(np.arange(len(verts)), k)
    b = nbr.ravel()
    pairs = np.unique(np.sort(np.stack([a, b], axis=1), axis=1), axis=0)
    lengths = cs.rowwise_distance(verts[pairs[:, 0]], verts[pairs[:, 1]])
    return LazyRoadmap(verts, pairs, lengths, np.ones(len(verts), dtype=bool))


class LazyPRMGuidance(ArgminGuidance):
    """h(v) = d(v, nearest alive vertex u) + lazy shortest path from u to the goal."""

    name = "lazyprm"

    def __init__(self, cs, task, rng=None, n_vertices: int = 300, k_neighbors: int = 8,
                 r_del: float | None = None, r_edge: float | None = None,
                 check_vertices: bool = True, drop_followed: bool = True,
                 roadmap: LazyRoadmap | None = None):
        super().__init__(cs, task)
        self.drop_followed = drop_followed
        self.n_vertices = n_vertices
        self.k_neighbors = k_neighbors
        self.check_vertices = check_vertices
        self.r_del = 2.0 * cs.step_size if r_del is None else float(r_del)
        self.r_edge = self.r_del if r_edge is None else float(r_edge)
        self.roadmap = roadmap if roadmap is not None else lazy_build(cs, task, n_vertices, k_neighbors, rng,
                                                                   check_vertices)
        self.deleted_count = 0
        self.deleted_edges = 0
        rm = self.roadmap
        # edges are unique sorted (a, b) pairs, so a * V + b is sorted too
        self._edge_code = rm.edges[:, 0] * len(rm) + rm.edges[:, 1]
        self._near = np.zeros(0, dtype=np.int64)
        self._dnear = np.zeros(0)
        self._refresh_paths()

    def params(self):
        return {"n_vertices": self.n_vertices, "k_neighbors": self.k_neighbors, "r_del": self.r_del,
                "r_edge": self.r_edge, "check_vertices": self.check_vertices,
                "drop_followed": self.drop_followed}

    def _refresh_paths(self):
        self.sp, self.pred = self.roadmap.shortest_to_goal()

    def _nearest_alive(self, poses: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rm = self.roadmap
        idx = np.flatnonzero(rm.alive)
        if len(idx) == 0:
            return np.zeros(len(poses), dtype=np.int64), np.full(len(poses), np.inf)
        d = self.cs.pairwise_distance(poses, rm.vertices[idx])
        j = np.argmin(d, axis=1)
        return idx[j], d[np.arange(len(poses)), j]

    def _sync(self, tree):
        n = len(tree)
        if len(self._near) < n:
            near, dn = self._nearest_alive(tree.poses[len(self._near):n])
            self._near = np.concatenate([self._near, near])
            self._dnear = np.concatenate([self._dnear, dn])

    def heuristic(self, tree):
        self._sync(tree)
        n = len(tree)
        return self._dnear[:n] + self.sp[self._near[:n]]

    def followed_edge(self, node: int) -> int | None:
        """Roadmap edge the expansion of ``node`` follows, if any."""
        u = int(self._near[node])
        if u == self.roadmap.goal_vertex or self._dnear[node] > self.cs.step_size:
            return None
        nxt = int(self.pred[u])
        if nxt < 0:
            return None
        code = min(u, nxt) * len(self.roadmap) + max(u, nxt)
        k = int(np.searchsorted(self._edge_code, code))
        if k < len(self._edge_code) and self._edge_code[k] == code:
            return k
        return None

    def target_for(self, tree, node):
        u = int(self._near[node])
        rm = self.roadmap
        if u == rm.goal_vertex:
            return rm.vertices[u].copy()
        if self._dnear[node] > self.cs.step_size:
            return rm.vertices[u].copy()
        nxt = int(self.pred[u])
        return rm.vertices[nxt if nxt >= 0 else u].copy()

    def on_success(self, tree, new_node):
        super().on_success(tree, new_node)
        self._sync(tree)

    def on_failure(self, tree, node, attempted, invalid_pose):
        # only failures of expansions this guidance proposed say anything about its edges
        ours = (self._last is not None and self._last[0][0] == node
                and np.array_equal(self._last[1], attempted))
        super().on_failure(tree, node, attempted, invalid_pose)
        rm = self.roadmap
        self._sync(tree)
        d = self.cs.distance_many(rm.vertices, invalid_pose)
        hit = rm.alive & (d <= self.r_del)
        hit[rm.goal_vertex] = False
        edges = rm.edges_near(self.cs, np.asarray(invalid_pose, dtype=float), self.r_edge)
        if self.drop_followed and ours:
            e = self.followed_edge(node)
            if e is not None and rm.edge_alive[e]:
                edges = np.union1d(edges, [e]).astype(np.int64)
        if not hit.any() and len(edges) == 0:
            return
        rm.alive[hit] = False
        rm.edge_alive[edges] = False
        self.deleted_count += int(hit.sum())
        self.deleted_edges += len(edges)
        self._refresh_paths()
        self._sync(tree)
        stale = np.flatnonzero(hit[self._near])
        if len(stale):
            near, dn = self._nearest_alive(tree.poses[stale])
            self._near[stale] = near
            self._dnear[stale] = dn
