"""Sampling-efficiency evaluation of node selection.

The target over tree nodes is a softmin of each node's normalized
suboptimality ``delta`` and remaining work ``tau`` (both from a grid
cost-to-go oracle), floored at ``eps`` by adding a constant ``gamma`` to every
unnormalized weight. A selection is scored by its divergence from that
target; for a deterministic selection this is ``-ln Q(selected)``. All logs
are natural (nats).
"""

from __future__ import annotations

import hashlib
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .cspace import CSpace, Task, as_pose_array
from .geometry import wrap_angle
from .searchtree import SearchResult, SearchTree

DEFAULT_GRID = (128, 128, 32)


# ---------------------------------------------------------------------------
# oracle

@dataclass(frozen=True, eq=False)
class OracleField:
    """Cost-to-goal on a grid aligned so that the goal pose is a cell center.

    Cell ``(i, j, k)`` has center ``(x0 + i*hx, y0 + j*hy, goal_theta + k*htheta)``;
    ``cost`` has shape ``(nx, ny, ntheta)`` and is ``inf`` where unreachable.
    """

    cost: np.ndarray
    origin: tuple[float, float]
    cell: tuple[float, float, float]
    goal: tuple[float, float, float]
    goal_cell: tuple[int, int, int]
    theta_weight: float

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.cost.shape)

    def cell_cost(self) -> float:
        """Cost of the largest single grid move (used as discretization slack)."""
        hx, hy, ht = self.cell
        return math.hypot(hx, hy) + self.theta_weight * ht

    def max_cost(self) -> float:
        """Largest finite cost-to-goal: the environment's scale for ``global``
        score normalization."""
        fin = self.cost[np.isfinite(self.cost)]
        return float(fin.max()) if fin.size else 1.0

    def cell_centers(self, idx: np.ndarray) -> np.ndarray:
        idx = np.asarray(idx)
        hx, hy, ht = self.cell
        out = np.empty(idx.shape[:-1] + (3,))
        out[..., 0] = self.origin[0] + idx[..., 0] * hx
        out[..., 1] = self.origin[1] + idx[..., 1] * hy
        out[..., 2] = wrap_angle(self.goal[2] + idx[..., 2] * ht)
        return out

    def nearest_cells(self, poses: np.ndarray) -> np.ndarray:
        poses = np.asarray(poses, dtype=float).reshape(-1, 3)
        hx, hy, ht = self.cell
        nx, ny, nt = self.shape
        i = np.clip(np.rint((poses[:, 0] - self.origin[0]) / hx), 0, nx - 1)
        j = np.clip(np.rint((poses[:, 1] - self.origin[1]) / hy), 0, ny - 1)
        k = np.mod(np.rint(wrap_angle(poses[:, 2] - self.goal[2]) / ht), nt)
        return np.stack([i, j, k], axis=1).astype(np.int64)


def _grid_axis(lo: float, hi: float, g: float, n: int) -> tuple[float, int, float]:
    """Cell size, count and origin of an axis whose centers include ``g``."""
    h = (hi - lo) / n
    i_lo = math.floor((lo - g) / h + 0.5)
    i_hi = math.ceil((hi - g) / h - 0.5)
    return h, i_hi - i_lo + 1, g + i_lo * h


def oracle_build(cs: CSpace, goal, grid: tuple[int, int, int] = DEFAULT_GRID) -> OracleField:
    """Dijkstra from the goal over the 26-connected (x, y, theta) grid.

    A cell is traversable iff its center pose is valid; moves cost the C-space
    metric between centers; theta wraps around.
    """
    goal = as_pose_array(goal)
    if not cs.is_valid(goal):
        raise ValueError("oracle goal pose is in collision")
    nx_req, ny_req, nt = (int(v) for v in grid)
    b = cs.bounds
    hx, nx, x0 = _grid_axis(b.xmin, b.xmax, goal[0], nx_req)
    hy, ny, y0 = _grid_axis(b.ymin, b.ymax, goal[1], ny_req)
    ht = 2 * math.pi / nt
    gi = int(round((goal[0] - x0) / hx))
    gj = int(round((goal[1] - y0) / hy))

    ii, jj, kk = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nt), indexing="ij")
    centers = np.stack([x0 + ii * hx, y0 + jj * hy, wrap_angle(goal[2] + kk * ht)], axis=-1)
    flat = centers.reshape(-1, 3)
    valid = np.zeros(len(flat), dtype=bool)
    chunk = 1 << 16
    for s in range(0, len(flat), chunk):
        valid[s: s + chunk] = cs.valid_many(flat[s: s + chunk])
    valid = valid.reshape(nx, ny, nt)
    valid[gi, gj, 0] = True

    ncell = nx * ny * nt
    index = np.arange(ncell).reshape(nx, ny, nt)
    rows, cols, data = [], [], []
    offsets = [(di, dj, dk) for di in (-1, 0, 1) for dj in (-1, 0, 1) for dk in (-1, 0, 1)
               if (di, dj, dk) > (0, 0, 0)]
    for di, dj, dk in offsets:
        si = slice(max(0, -di), nx - max(0, di))
        sj = slice(max(0, -dj), ny - max(0, dj))
        ti = slice(max(0, di), nx - max(0, -di))
        tj = slice(max(0, dj), ny - max(0, -dj))
        src_valid = valid[si, sj, :]
        dst_valid = np.roll(valid, -dk, axis=2)[ti, tj, :]
        both = src_valid & dst_valid
        src = index[si, sj, :][both]
        dst = np.roll(index, -dk, axis=2)[ti, tj, :][both]
        w = math.hypot(di * hx, dj * hy) + cs.theta_weight * abs(dk) * ht
        rows.append(src)
        cols.append(dst)
        data.append(np.full(len(src), w))
    g = sparse.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
                          shape=(ncell, ncell))
    goal_idx = int(index[gi, gj, 0])
    dist = csgraph.dijkstra(g, directed=False, indices=goal_idx)
    cost = dist.reshape(nx, ny, nt)
    cost[~valid] = np.inf
    return OracleField(cost, (x0, y0), (hx, hy, ht), tuple(goal.tolist()), (gi, gj, 0),
                       float(cs.theta_weight))


_NEIGHBORS = np.array([(di, dj, dk) for di in (-1, 0, 1) for dj in (-1, 0, 1) for dk in (-1, 0, 1)])


def oracle_query_many(field: OracleField, poses: np.ndarray) -> np.ndarray:
    """Cost-to-goal estimate per pose.

    The containing cell's cost plus the metric offset to its center; if that
    cell is untraversable (a valid pose whose cell center collides, typical
    near walls) the best of its 26 neighbors is used the same way. The offset
    keeps the estimate at or above the true metric distance to the goal.
    """
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    nx, ny, nt = field.shape
    base = field.nearest_cells(poses)
    cand = base[:, None, :] + _NEIGHBORS[None, :, :]
    inside = (cand[..., 0] >= 0) & (cand[..., 0] < nx) & (cand[..., 1] >= 0) & (cand[..., 1] < ny)
    ci = np.clip(cand[..., 0], 0, nx - 1)
    cj = np.clip(cand[..., 1], 0, ny - 1)
    ck = np.mod(cand[..., 2], nt)
    c = field.cost[ci, cj, ck]
    c = np.where(inside, c, np.inf)
    centers = field.cell_centers(np.stack([ci, cj, ck], axis=-1))
    d = centers - poses[:, None, :]
    off = np.hypot(d[..., 0], d[..., 1]) + field.theta_weight * np.abs(wrap_angle(d[..., 2]))
    total = c + off
    center = np.flatnonzero((_NEIGHBORS == 0).all(axis=1))[0]
    own = total[:, center]
    return np.where(np.isfinite(own), own, total.min(axis=1))


def oracle_query(field: OracleField, p) -> float:
    return float(oracle_query_many(field, as_pose_array(p)[None, :])[0])


def oracle_key(cs: CSpace, goal, grid) -> str:
    env = {
        "bounds": cs.bounds.as_list(),
        "robot": [cs.robot.half_length, cs.robot.half_width],
        "obstacles": [p.points.tolist() for p in cs.obstacles],
        "theta_weight": cs.theta_weight,
    }
    payload = json.dumps({"env": env, "goal": list(map(float, as_pose_array(goal))),
                          "grid": list(map(int, grid))}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:24]


_MAGIC = b"GKORACL1"
_HEADER = struct.Struct("<8s3q12d")


def save_oracle(field: OracleField, path) -> None:
    """Header (shape, geometry) followed by the row-major little-endian float64
    cost array; unreachable cells are stored as IEEE infinity."""
    nx, ny, nt = field.shape
    head = _HEADER.pack(_MAGIC, nx, ny, nt, *field.origin, *field.cell, *field.goal,
                        *(float(v) for v in field.goal_cell), field.theta_weight)
    with open(path, "wb") as fh:
        fh.write(head)
        fh.write(np.ascontiguousarray(field.cost, dtype="<f8").tobytes())


def load_oracle(path) -> OracleField:
    raw = Path(path).read_bytes()
    magic, nx, ny, nt, x0, y0, hx, hy, ht, gx, gy, gt, ci, cj, ck, tw = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ValueError(f"{path} is not an oracle file")
    cost = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(nx, ny, nt).astype(float)
    return OracleField(cost, (x0, y0), (hx, hy, ht), (gx, gy, gt), (int(ci), int(cj), int(ck)), tw)


def cached_oracle(cs: CSpace, goal, grid=DEFAULT_GRID, cache_dir=None) -> OracleField:
    """Load the oracle from ``cache_dir`` if present, else build and store it."""
    if cache_dir is None:
        return oracle_build(cs, goal, grid)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"oracle-{oracle_key(cs, goal, grid)}.bin"
    if path.exists():
        return load_oracle(path)
    field = oracle_build(cs, goal, grid)
    tmp = path.with_suffix(".tmp")
    save_oracle(field, tmp)
    tmp.replace(path)
    return field


# ---------------------------------------------------------------------------
# target distribution

def node_scores(tree: SearchTree, task: Task, field: OracleField) -> tuple[np.ndarray, np.ndarray]:
    """Raw ``(delta, tau)`` per node.

    ``tau`` is the oracle cost-to-go and ``delta = cost_from_root + tau - tau(start)``
    clamped at 0 (0 for every reachable node when the start itself is
    unreachable). Nodes the oracle cannot reach keep ``inf`` in both; the
    normalization in :func:`target_distribution` maps them to the worst score.
    """
    tau = oracle_query_many(field, tree.poses)
    tau_s = oracle_query(field, task.start)
    bad = ~np.isfinite(tau)
    delta = np.full(len(tau), np.inf)
    if np.isfinite(tau_s):
        delta[~bad] = np.maximum(tree.cost_from_root[~bad] + tau[~bad] - tau_s, 0.0)
    else:
        # a grid too coarse to reach the start gives no detour baseline
        delta[~bad] = 0.0
    return delta, tau


NORMALIZATIONS = ("minmax", "max", "global")


def normalize_scores(x: np.ndarray, mode: str = "minmax", scale: float | None = None) -> np.ndarray:
    """Map finite values to [0, 1]; ``inf`` maps to 1, constant columns to 0.

    ``minmax`` and ``max`` rescale per call (per tree); ``global`` divides by
    a fixed environment ``scale`` and clips at 1, so scores of different
    trees share units.
    """
    x = np.asarray(x, dtype=float)
    fin = np.isfinite(x)
    out = np.ones_like(x)
    if not fin.any():
        return out
    v = x[fin]
    if mode == "minmax":
        lo, hi = v.min(), v.max()
        out[fin] = (v - lo) / (hi - lo) if hi > lo else 0.0
    elif mode == "max":
        hi = v.max()
        out[fin] = v / hi if hi > 0 else 0.0
    elif mode == "global":
        if not (scale and scale > 0):
            raise ValueError("global normalization needs a positive scale")
        out[fin] = np.minimum(v / scale, 1.0)
    else:
        raise ValueError(f"unknown normalization {mode!r}")
    return out


@dataclass
class TargetDistribution:
    probs: np.ndarray
    base: np.ndarray       # unsmoothed softmin Q
    delta: np.ndarray
    tau: np.ndarray
    gamma: float
    Z: float
    params: dict

    def __len__(self):
        return len(self.probs)


def target_distribution(delta, tau, delta_temp: float = 0.1, tau_temp: float = 0.1,
                        eps: float = 1e-4, normalize: str | None = "minmax",
                        scale: float | None = None) -> TargetDistribution:
    """Smoothed softmin target over nodes.

    ``gamma`` is the smallest constant that, added to every weight
    ``exp(-(delta/delta_temp + tau/tau_temp))``, lifts every probability to at
    least ``eps``. Weights are shifted by their largest value before
    exponentiation; ``Z`` and ``gamma`` are reported in that shifted frame
    (so ``Z >= 1``), which leaves the probabilities unchanged.
    """
    delta = np.asarray(delta, dtype=float)
    tau = np.asarray(tau, dtype=float)
    n = len(delta)
    if n == 0 or len(tau) != n:
        raise ValueError("delta and tau must be non-empty and aligned")
    if not (delta_temp > 0 and tau_temp > 0):
        raise ValueError("temperatures must be positive")
    if not 0 < eps or eps * n >= 1:
        raise ValueError(f"need 0 < eps < 1/|T| (eps={eps}, |T|={n})")
    if normalize:
        d = normalize_scores(delta, normalize, scale)
        t = normalize_scores(tau, normalize, scale)
    else:
        if not (np.isfinite(delta).all() and np.isfinite(tau).all()):
            raise ValueError("unnormalized scores must be finite")
        d, t = delta, tau
    s = d / delta_temp + t / tau_temp
    w = np.exp(-(s - s.min()))
    Z = float(w.sum())
    q = w / Z
    gamma = max(0.0, float(np.max(Z * (eps - q) / (1.0 - eps * n))))
    probs = (w + gamma) / (Z + gamma * n)
    return TargetDistribution(probs, q, d, t, gamma, Z,
                              {"delta": delta_temp, "tau": tau_temp, "eps": eps, "normalize": normalize,
                               "scale": scale})


# ---------------------------------------------------------------------------
# divergences

def kl_divergence(p, q) -> float:
    """``sum p ln(p/q)`` with ``0 ln 0 = 0``; ``inf`` if q misses p's support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions differ in length")
    m = p > 0
    if np.any(q[m] <= 0):
        return math.inf
    return float(max(0.0, np.sum(p[m] * (np.log(p[m]) - np.log(q[m])))))


def js_divergence(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions differ in length")
    # KL(p||m) and KL(q||m) with m = (p+q)/2 written against p+q, which
    # cannot underflow to 0 where p or q is positive
    s = p + q
    total = 0.0
    for x in (p, q):
        k = x > 0
        total += float(np.sum(x[k] * (math.log(2.0) + np.log(x[k]) - np.log(s[k]))))
    return min(max(0.0, 0.5 * total), math.log(2.0))


def distribution_entropy(p) -> float:
    p = np.asarray(p, dtype=float)
    nz = p[p > 0]
    return float(max(0.0, -np.sum(nz * np.log(nz))))


METRIC_MODES = ("nll", "kl", "js")


def sampling_efficiency(selected: int, target: TargetDistribution, mode: str = "nll",
                        distribution=None) -> float:
    if mode == "nll":
        return float(-math.log(target.probs[selected]))
    if mode not in METRIC_MODES:
        raise ValueError(f"unknown metric mode {mode!r}; expected one of {METRIC_MODES}")
    if distribution is None:
        raise ValueError(f"metric mode {mode!r} needs the selection distribution")
    if mode == "kl":
        return kl_divergence(distribution, target.probs)
    return js_divergence(distribution, target.probs)


def evaluate_run(result: SearchResult, task: Task, field: OracleField, *, mode: str = "nll",
                 delta_temp: float = 0.1, tau_temp: float = 0.1, eps: float = 1e-4,
                 normalize: str = "minmax", check: bool = True) -> np.ndarray:
    """Per-iteration sampling efficiency of a finished search.

    Iteration ``k`` is scored against the target built from the tree as it
    was when the node was selected (the first ``tree_size`` nodes). In ``kl``
    and ``js`` modes, iterations without a recorded distribution fall back to
    ``nll`` (a point mass), which is exact for deterministic selections.
    """
    delta, tau = node_scores(result.tree, task, field)
    scale = field.max_cost() if normalize == "global" else None
    out = np.empty(len(result.records))
    bound = math.log(1.0 / eps)
    for k, rec in enumerate(result.records):
        n = rec.tree_size
        tgt = target_distribution(delta[:n], tau[:n], delta_temp, tau_temp, eps, normalize, scale)
        if check and tgt.probs.min() < eps - 1e-12:
            raise AssertionError(f"target below eps at iteration {k}: {tgt.probs.min()}")
        dist = rec.selection_distribution
        if mode == "nll" or dist is None:
            se = sampling_efficiency(rec.selected_node, tgt, "nll")
        else:
            se = sampling_efficiency(rec.selected_node, tgt, mode, dist)
        if check and not (-1e-12 <= se <= bound + 1e-9):
            raise AssertionError(f"sampling efficiency {se} outside [0, ln(1/eps)] at iteration {k}")
        out[k] = se
    return out
