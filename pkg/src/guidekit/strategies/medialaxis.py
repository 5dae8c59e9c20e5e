"""Workspace medial-axis guidance.

The free workspace is rasterized and thinned to its medial axis, which is
split into chains between junction and end pixels. A tree node projects to the
nearest skeleton pixel; its heuristic is the weighted skeleton distance from
there to the goal's projection. Each failed expansion multiplies the weight of
the failing node's chain, making guidance along it less attractive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree
from skimage.morphology import medial_axis

from ..geometry import OccupancyGrid, rasterize
from ..guidance import ArgminGuidance


@dataclass
class SkeletonGraph:
    """Pixel-level skeleton: ``points`` are workspace positions of skeleton
    pixels, ``links`` join 8-adjacent pixels, and every link belongs to one
    chain (``link_chain``) whose weight scales its length."""

    points: np.ndarray        # (P, 2)
    clearance: np.ndarray     # (P,)
    links: np.ndarray         # (L, 2)
    link_length: np.ndarray   # (L,)
    link_chain: np.ndarray    # (L,)
    chain_length: np.ndarray  # (C,)
    weight: np.ndarray = field(default=None)  # (C,) >= 1

    def __post_init__(self):
        if self.weight is None:
            self.weight = np.ones(len(self.chain_length))

    @property
    def nodes(self) -> np.ndarray:
        """Junction and end pixels (degree != 2)."""
        deg = np.bincount(self.links.ravel(), minlength=len(self.points))
        return self.points[deg != 2]

    def n_chains(self) -> int:
        return len(self.chain_length)

    def weighted_graph(self) -> sparse.csr_matrix:
        p = len(self.points)
        w = self.link_length * self.weight[self.link_chain]
        return sparse.csr_matrix((w, (self.links[:, 0], self.links[:, 1])), shape=(p, p))


def skeleton_extract(grid: OccupancyGrid, robot_clearance: float = 0.0) -> SkeletonGraph:
    """Medial axis of the free cells of ``grid`` (outside the grid is occupied).

    Skeleton pixels whose clearance is below ``robot_clearance`` are dropped.
    """
    free = ~grid.occupied
    if not free.any():
        raise ValueError("occupancy grid has no free cells")
    padded = np.pad(free, 1, constant_values=False)
    # medial_axis breaks thinning ties randomly; a fixed seed keeps the skeleton reproducible
    skel, dist = medial_axis(padded, return_distance=True, rng=0)
    skel = skel[1:-1, 1:-1]
    clear = dist[1:-1, 1:-1] * grid.cell_size
    skel &= clear >= robot_clearance
    if not skel.any():
        raise ValueError("medial axis is empty")
    iy, ix = np.nonzero(skel)
    index = -np.ones(skel.shape, dtype=np.int64)
    index[iy, ix] = np.arange(len(iy))
    xs, ys = grid.cell_centers()
    points = np.stack([xs[ix], ys[iy]], axis=1)

    h, w = skel.shape

    def at(y, x):
        ok = (y >= 0) & (y < h) & (x >= 0) & (x < w)
        out = np.full(len(y), -1, dtype=np.int64)
        out[ok] = index[y[ok], x[ok]]
        return out

    links = []
    for dy, dx in ((0, 1), (1, 0)):
        nb = at(iy + dy, ix + dx)
        m = nb >= 0
        links.append(np.stack([index[iy[m], ix[m]], nb[m]], axis=1))
    for dy, dx in ((1, 1), (1, -1)):
        nb = at(iy + dy, ix + dx)
        # a diagonal step is redundant when an L-shaped 4-connected route exists
        corner = (at(iy + dy, ix) >= 0) | (at(iy, ix + dx) >= 0)
        m = (nb >= 0) & ~corner
        links.append(np.stack([index[iy[m], ix[m]], nb[m]], axis=1))
    links = np.concatenate(links).astype(np.int64) if links else np.zeros((0, 2), dtype=np.int64)
    seg = points[links[:, 1]] - points[links[:, 0]]
    link_length = np.hypot(seg[:, 0], seg[:, 1])

    npx = len(points)
    deg = np.bincount(links.ravel(), minlength=npx)
    inner = deg == 2
    both = inner[links[:, 0]] & inner[links[:, 1]]
    g = sparse.csr_matrix((np.ones(both.sum()), (links[both, 0], links[both, 1])), shape=(npx, npx))
    ncomp, comp = csgraph.connected_components(g, directed=False)
    link_chain = np.empty(len(links), dtype=np.int64)
    a_in, b_in = inner[links[:, 0]], inner[links[:, 1]]
    link_chain[a_in] = comp[links[a_in, 0]]
    only_b = ~a_in & b_in
    link_chain[only_b] = comp[links[only_b, 1]]
    node_node = ~a_in & ~b_in
    link_chain[node_node] = ncomp + np.arange(node_node.sum())
    # compact chain ids to those actually used
    used, link_chain = np.unique(link_chain, return_inverse=True)
    chain_length = np.bincount(link_chain, weights=link_length, minlength=len(used))
    return SkeletonGraph(points, clear[iy, ix], links, link_length, link_chain, chain_length)


class MedialAxisGuidance(ArgminGuidance):
    """h(v) = weighted skeleton distance from v's projection to the goal's."""

    name = "medialaxis"

    def __init__(self, cs, task, cell_size: float | None = None,
                 robot_clearance: float = 0.0, w_penalty: float = 2.0,
                 skeleton: SkeletonGraph | None = None):
        super().__init__(cs, task)
        self.cell_size = 0.005 * cs.bounds.diagonal if cell_size is None else float(cell_size)
        self.robot_clearance = float(robot_clearance)
        self.w_penalty = float(w_penalty)
        if skeleton is None:
            grid = rasterize(cs.obstacle_set, cs.bounds, self.cell_size)
            skeleton = skeleton_extract(grid, self.robot_clearance)
        else:
            skeleton = SkeletonGraph(skeleton.points, skeleton.clearance, skeleton.links,
                                     skeleton.link_length, skeleton.link_chain,
                                     skeleton.chain_length, skeleton.weight.copy())
        if len(skeleton.points) == 0:
            raise ValueError("empty skeleton")
        self.skeleton = skeleton
        self._kd = cKDTree(skeleton.points)
        self.goal_pixel = int(self._kd.query(self.goal[:2])[1])
        npx = len(skeleton.points)
        # incident links per pixel, for resolving the chain of the goal pixel
        self._first_link = np.full(npx, -1, dtype=np.int64)
        for li in range(len(skeleton.links) - 1, -1, -1):
            a, b = skeleton.links[li]
            self._first_link[a] = li
            self._first_link[b] = li
        self._link_of = {}
        for li, (a, b) in enumerate(skeleton.links):
            self._link_of[(int(a), int(b))] = li
            self._link_of[(int(b), int(a))] = li
        self._pix = np.zeros(0, dtype=np.int64)
        self.failures_per_chain = np.zeros(skeleton.n_chains(), dtype=np.int64)
        self._refresh()

    def params(self):
        return {"cell_size": self.cell_size, "robot_clearance": self.robot_clearance,
                "w_penalty": self.w_penalty}

    def _refresh(self):
        self.dist, self.pred = csgraph.dijkstra(self.skeleton.weighted_graph(), directed=False,
                                                indices=self.goal_pixel, return_predecessors=True)

    def project(self, xy: np.ndarray) -> np.ndarray:
        return np.asarray(self._kd.query(np.asarray(xy).reshape(-1, 2))[1], dtype=np.int64)

    def _sync(self, tree):
        n = len(tree)
        if len(self._pix) < n:
            self._pix = np.concatenate([self._pix, self.project(tree.poses[len(self._pix):n, :2])])

    def heuristic(self, tree):
        self._sync(tree)
        return self.dist[self._pix[: len(tree)]]

    def chain_of_node(self, node: int) -> int:
        p = int(self._pix[node])
        q = int(self.pred[p])
        if q >= 0:
            return int(self.skeleton.link_chain[self._link_of[(p, q)]])
        li = int(self._first_link[p])
        return int(self.skeleton.link_chain[li]) if li >= 0 else -1

    def target_for(self, tree, node):
        p = int(self._pix[node])
        theta = tree.poses[node, 2]
        travelled = 0.0
        pts = self.skeleton.points
        step = self.cs.step_size
        while p != self.goal_pixel:
            q = int(self.pred[p])
            if q < 0:
                break
            travelled += float(np.hypot(*(pts[q] - pts[p])))
            p = q
            if travelled >= step:
                return np.array([pts[p, 0], pts[p, 1], theta])
        if p == self.goal_pixel:
            return self.goal.copy()
        return np.array([pts[p, 0], pts[p, 1], theta])

    def on_success(self, tree, new_node):
        super().on_success(tree, new_node)
        self._sync(tree)

    def on_failure(self, tree, node, attempted, invalid_pose):
        super().on_failure(tree, node, attempted, invalid_pose)
        self._sync(tree)
        c = self.chain_of_node(node)
        if c < 0:
            return
        self.skeleton.weight[c] *= self.w_penalty
        self.failures_per_chain[c] += 1
        self._refresh()
