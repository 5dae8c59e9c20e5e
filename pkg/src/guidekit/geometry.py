"""2D geometry for a rectangular robot in a polygonal world.

Poses are ``(x, y, theta)`` with theta wrapped into ``[-pi, pi)``. Obstacles are
simple polygons; non-convex ones are split into triangles by ear clipping so
that every collision query reduces to a separating-axis test between convex
pieces. Boundary contact counts as collision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Raised for degenerate or malformed geometry."""


def wrap_angle(theta):
    """Wrap an angle (scalar or array) into ``[-pi, pi)``."""
    wrapped = np.mod(np.asarray(theta, dtype=float) + math.pi, TWO_PI) - math.pi
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class Vec2:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"non-finite vector ({self.x}, {self.y})")

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> "Vec2":
        return Vec2(self.x * s, self.y * s)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Vec2") -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Pose:
    """SE(2) configuration. ``theta`` is normalized at construction."""

    x: float
    y: float
    theta: float = 0.0

    def __post_init__(self):
        vals = (self.x, self.y, self.theta)
        if not all(math.isfinite(float(v)) for v in vals):
            raise GeometryError(f"non-finite pose {vals}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "theta", wrap_angle(float(self.theta)))

    @classmethod
    def from_array(cls, arr) -> "Pose":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.theta])

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.theta]

    @property
    def position(self) -> Vec2:
        return Vec2(self.x, self.y)


@dataclass(frozen=True)
class RectRobot:
    half_length: float
    half_width: float

    def __post_init__(self):
        if not (self.half_length > 0 and self.half_width > 0):
            raise GeometryError("robot extents must be positive")

    @property
    def circumradius(self) -> float:
        return math.hypot(self.half_length, self.half_width)


@dataclass(frozen=True)
class Bounds:
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise GeometryError("empty bounds")

    @property
    def diagonal(self) -> float:
        return math.hypot(self.xmax - self.xmin, self.ymax - self.ymin)

    @property
    def area(self) -> float:
        return (self.xmax - self.xmin) * (self.ymax - self.ymin)

    @property
    def center(self) -> Vec2:
        return Vec2(0.5 * (self.xmin + self.xmax), 0.5 * (self.ymin + self.ymax))

    def as_list(self) -> list[float]:
        return [self.xmin, self.ymin, self.xmax, self.ymax]


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Proper or touching intersection of two closed segments."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
                and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


class Polygon:
    """Simple polygon stored counter-clockwise.

    Clockwise input is reversed; fewer than three vertices, zero area or a
    self-intersecting boundary raise :class:`GeometryError`.
    """

    def __init__(self, vertices: Iterable):
        pts = np.array([[float(v[0]), float(v[1])] if not isinstance(v, Vec2) else [v.x, v.y]
                        for v in vertices], dtype=float)
        if pts.ndim != 2 or len(pts) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("non-finite polygon vertex")
        area = _signed_area(pts)
        if abs(area) < 1e-12:
            raise GeometryError("degenerate polygon (zero area)")
        if area < 0:
            pts = pts[::-1].copy()
        n = len(pts)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]):
                    raise GeometryError("self-intersecting polygon")
        pts.flags.writeable = False
        self._pts = pts

    @property
    def points(self) -> np.ndarray:
        return self._pts

    @property
    def vertices(self) -> list[Vec2]:
        return [Vec2(float(x), float(y)) for x, y in self._pts]

    @property
    def area(self) -> float:
        return _signed_area(self._pts)

    @cached_property
    def is_convex(self) -> bool:
        p = self._pts
        e = np.roll(p, -1, axis=0) - p
        cr = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
        return bool(np.all(cr >= -1e-12))

    def contains(self, pt) -> bool:
        """Closed point-in-polygon test (boundary counts as inside)."""
        x, y = float(pt[0]), float(pt[1])
        p = self._pts
        n = len(p)
        inside = False
        for i in range(n):
            a, b = p[i], p[(i + 1) % n]
            cr = (b[0] - a[0]) * (y - a[1]) - (b[1] - a[1]) * (x - a[0])
            if abs(cr) < 1e-12 and min(a[0], b[0]) - 1e-12 <= x <= max(a[0], b[0]) + 1e-12 \
                    and min(a[1], b[1]) - 1e-12 <= y <= max(a[1], b[1]) + 1e-12:
                return True
            if (a[1] > y) != (b[1] > y):
                xi = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
                if x < xi:
                    inside = not inside
        return inside

    def __len__(self):
        return len(self._pts)

    def __repr__(self):
        return f"Polygon({self._pts.tolist()})"

    def __eq__(self, other):
        return isinstance(other, Polygon) and np.array_equal(self._pts, other._pts)

    def __hash__(self):
        return hash(self._pts.tobytes())


def rect_polygon(xmin: float, ymin: float, xmax: float, ymax: float) -> Polygon:
    return Polygon([(xmin, ymin), (xmax, ymin), (xmax, ymax), (xmin, ymax)])


def rect_corners(robot: RectRobot, pose: Pose) -> list[Vec2]:
    """Corners of the oriented rectangle, counter-clockwise."""
    arr = rect_corners_array(robot, pose.as_array()[None, :])[0]
    return [Vec2(float(x), float(y)) for x, y in arr]


def rect_corners_array(robot: RectRobot, poses: np.ndarray) -> np.ndarray:
    """Vectorized corners, shape ``(M, 4, 2)`` for ``poses`` of shape ``(M, 3)``."""
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    # canonical angle first, so theta and theta + 2k*pi give identical corners
    th = wrap_angle(poses[:, 2])
    c, s = np.cos(th), np.sin(th)
    local = np.array([[1, 1], [-1, 1], [-1, -1], [1, -1]], dtype=float)
    lx = local[:, 0] * robot.half_length
    ly = local[:, 1] * robot.half_width
    out = np.empty((len(poses), 4, 2))
    out[:, :, 0] = poses[:, 0:1] + c[:, None] * lx - s[:, None] * ly
    out[:, :, 1] = poses[:, 1:2] + s[:, None] * lx + c[:, None] * ly
    return out


def _edge_normals(pts: np.ndarray) -> np.ndarray:
    e = np.roll(pts, -1, axis=0) - pts
    return np.stack([-e[:, 1], e[:, 0]], axis=1)


def convex_overlap(a: Polygon, b: Polygon) -> bool:
    """Separating-axis test for two convex polygons (touching counts)."""
    if not (a.is_convex and b.is_convex):
        raise GeometryError("convex_overlap requires convex polygons")
    pa, pb = a.points, b.points
    for axes in (_edge_normals(pa), _edge_normals(pb)):
        proj_a = pa @ axes.T
        proj_b = pb @ axes.T
        sep = (proj_a.max(axis=0) < proj_b.min(axis=0)) | (proj_b.max(axis=0) < proj_a.min(axis=0))
        if np.any(sep):
            return False
    return True


def _is_ear(pts: np.ndarray, idx: list[int], k: int) -> bool:
    n = len(idx)
    i0, i1, i2 = idx[(k - 1) % n], idx[k], idx[(k + 1) % n]
    a, b, c = pts[i0], pts[i1], pts[i2]
    cr = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if cr <= 1e-12:
        return False
    for j in idx:
        if j in (i0, i1, i2):
            continue
        p = pts[j]
        d1 = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
        d2 = (c[0] - b[0]) * (p[1] - b[1]) - (c[1] - b[1]) * (p[0] - b[0])
        d3 = (a[0] - c[0]) * (p[1] - c[1]) - (a[1] - c[1]) * (p[0] - c[0])
        if d1 >= -1e-12 and d2 >= -1e-12 and d3 >= -1e-12:
            return False
    return True


def triangulate(poly: Polygon) -> list[Polygon]:
    """Ear-clipping triangulation of a simple CCW polygon."""
    pts = poly.points
    idx = list(range(len(pts)))
    tris = []
    guard = 0
    while len(idx) > 3:
        for k in range(len(idx)):
            if _is_ear(pts, idx, k):
                n = len(idx)
                tris.append((idx[(k - 1) % n], idx[k], idx[(k + 1) % n]))
                del idx[k]
                break
        else:
            # collinear remnants; drop the flattest vertex
            n = len(idx)
            areas = []
            for k in range(n):
                a, b, c = pts[idx[(k - 1) % n]], pts[idx[k]], pts[idx[(k + 1) % n]]
                areas.append(abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])))
            del idx[int(np.argmin(areas))]
        guard += 1
        if guard > 10 * len(pts):
            raise GeometryError("ear clipping failed")
    tris.append(tuple(idx))
    out = []
    for t in tris:
        tri = pts[list(t)]
        if abs(_signed_area(tri)) > 1e-12:
            out.append(Polygon(tri))
    return out


def convex_pieces(obstacles: Sequence[Polygon]) -> list[Polygon]:
    pieces = []
    for poly in obstacles:
        pieces.extend([poly] if poly.is_convex else triangulate(poly))
    return pieces


class ObstacleSet:
    """Convex obstacle pieces packed into padded arrays for batched SAT.

    Pieces with fewer vertices are padded by repeating their last vertex; the
    resulting zero-length edges give null axes, which never separate.
    """

    def __init__(self, obstacles: Sequence[Polygon]):
        self.obstacles = tuple(obstacles)
        self.pieces = convex_pieces(self.obstacles)
        k = len(self.pieces)
        vmax = max((len(p) for p in self.pieces), default=3)
        verts = np.zeros((k, vmax, 2))
        for i, p in enumerate(self.pieces):
            pts = p.points
            verts[i, : len(pts)] = pts
            verts[i, len(pts):] = pts[-1]
        self.verts = verts
        nrm = np.zeros_like(verts)
        for i, p in enumerate(self.pieces):
            nrm[i, : len(p)] = _edge_normals(p.points)
        self.normals = nrm
        # interval of each piece on each of its own normals: (K, V, 2)
        proj = np.einsum("kvd,kwd->kwv", verts, nrm)
        self.own_interval = np.stack([proj.min(axis=2), proj.max(axis=2)], axis=2)
        if k:
            self.aabb = np.concatenate([verts.min(axis=1), verts.max(axis=1)], axis=1)
        else:
            self.aabb = np.zeros((0, 4))

    def __len__(self):
        return len(self.pieces)

    def rect_collisions(self, robot: RectRobot, poses: np.ndarray) -> np.ndarray:
        """Boolean per pose: does the oriented rectangle touch any piece."""
        poses = np.asarray(poses, dtype=float).reshape(-1, 3)
        m = len(poses)
        hit = np.zeros(m, dtype=bool)
        if m == 0 or len(self.pieces) == 0:
            return hit
        corners = rect_corners_array(robot, poses)
        lo = corners.min(axis=1)
        hi = corners.max(axis=1)
        box = self.aabb
        cand = ((lo[:, None, 0] <= box[None, :, 2]) & (hi[:, None, 0] >= box[None, :, 0])
                & (lo[:, None, 1] <= box[None, :, 3]) & (hi[:, None, 1] >= box[None, :, 1]))
        pi, ki = np.nonzero(cand)
        if len(pi) == 0:
            return hit
        th = wrap_angle(poses[pi, 2])
        c = np.cos(th)
        s = np.sin(th)
        ctr = poses[pi, :2]
        verts = self.verts[ki]
        sep = np.zeros(len(pi), dtype=bool)
        for ax, half in ((np.stack([c, s], 1), robot.half_length),
                         (np.stack([-s, c], 1), robot.half_width)):
            pv = np.einsum("pvd,pd->pv", verts, ax)
            pc = np.einsum("pd,pd->p", ctr, ax)
            sep |= (pv.max(axis=1) < pc - half) | (pv.min(axis=1) > pc + half)
        rc = np.einsum("pcd,pwd->pwc", corners[pi], self.normals[ki])
        iv = self.own_interval[ki]
        sep |= np.any((rc.max(axis=2) < iv[:, :, 0]) | (rc.min(axis=2) > iv[:, :, 1]), axis=1)
        np.logical_or.at(hit, pi, ~sep)
        return hit

    def points_inside(self, pts: np.ndarray) -> np.ndarray:
        """Closed containment of points in any piece, shape ``(M,)``."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        inside = np.zeros(len(pts), dtype=bool)
        for i, p in enumerate(self.pieces):
            lo, hi = self.aabb[i, :2], self.aabb[i, 2:]
            sel = np.all((pts >= lo - 1e-12) & (pts <= hi + 1e-12), axis=1)
            if not np.any(sel):
                continue
            q = pts[sel]
            v = p.points
            e = np.roll(v, -1, axis=0) - v
            cr = e[None, :, 0] * (q[:, None, 1] - v[None, :, 1]) - e[None, :, 1] * (q[:, None, 0] - v[None, :, 0])
            inside[np.flatnonzero(sel)[np.all(cr >= -1e-12, axis=1)]] = True
        return inside


def rects_out_of_bounds(robot: RectRobot, poses: np.ndarray, bounds: Bounds) -> np.ndarray:
    corners = rect_corners_array(robot, poses)
    return ((corners[:, :, 0].min(axis=1) < bounds.xmin) | (corners[:, :, 0].max(axis=1) > bounds.xmax)
            | (corners[:, :, 1].min(axis=1) < bounds.ymin) | (corners[:, :, 1].max(axis=1) > bounds.ymax))


def robot_in_collision(robot: RectRobot, pose: Pose, obstacles, bounds: Bounds) -> bool:
    """True iff the rectangle at ``pose`` touches an obstacle or leaves ``bounds``.

    ``obstacles`` may be a list of polygons or a prepared :class:`ObstacleSet`.
    """
    obs = obstacles if isinstance(obstacles, ObstacleSet) else ObstacleSet(obstacles)
    arr = pose.as_array()[None, :]
    return bool(rects_out_of_bounds(robot, arr, bounds)[0] or obs.rect_collisions(robot, arr)[0])


@dataclass(frozen=True)
class OccupancyGrid:
    """Row-major occupancy: ``occupied[iy, ix]``; cell centers at
    ``origin + (i + 0.5) * cell_size``."""

    origin: Vec2
    cell_size: float
    width: int
    height: int
    occupied: np.ndarray

    def __post_init__(self):
        if self.cell_size <= 0:
            raise GeometryError("cell_size must be positive")
        if self.occupied.shape != (self.height, self.width):
            raise GeometryError("occupancy shape mismatch")

    def cell_centers(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.origin.x + (np.arange(self.width) + 0.5) * self.cell_size
        ys = self.origin.y + (np.arange(self.height) + 0.5) * self.cell_size
        return xs, ys

    def cell_of(self, x: float, y: float) -> tuple[int, int]:
        ix = int(np.clip(np.floor((x - self.origin.x) / self.cell_size), 0, self.width - 1))
        iy = int(np.clip(np.floor((y - self.origin.y) / self.cell_size), 0, self.height - 1))
        return iy, ix


def rasterize(obstacles, bounds: Bounds, cell_size: float) -> OccupancyGrid:
    """Occupancy grid over ``bounds``; a cell is occupied iff its center lies
    inside an obstacle (closed) or outside the bounds."""
    if cell_size <= 0:
        raise GeometryError("cell_size must be positive")
    obs = obstacles if isinstance(obstacles, ObstacleSet) else ObstacleSet(obstacles)
    w = int(math.ceil((bounds.xmax - bounds.xmin) / cell_size - 1e-9))
    h = int(math.ceil((bounds.ymax - bounds.ymin) / cell_size - 1e-9))
    origin = Vec2(bounds.xmin, bounds.ymin)
    xs = bounds.xmin + (np.arange(w) + 0.5) * cell_size
    ys = bounds.ymin + (np.arange(h) + 0.5) * cell_size
    gx, gy = np.meshgrid(xs, ys)
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    occ = obs.points_inside(pts)
    occ |= (pts[:, 0] > bounds.xmax) | (pts[:, 1] > bounds.ymax)
    return OccupancyGrid(origin, float(cell_size), w, h, occ.reshape(h, w))
