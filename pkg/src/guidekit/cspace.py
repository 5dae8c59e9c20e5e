"""Configuration space of a rectangle robot: validity, metric, sampling and
the straight-line local planner.

Internally poses travel as ``(3,)`` or ``(M, 3)`` float arrays; the public
functions also accept :class:`~guidekit.geometry.Pose`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .geometry import (
    Bounds,
    GeometryError,
    ObstacleSet,
    Polygon,
    Pose,
    RectRobot,
    rects_out_of_bounds,
    wrap_angle,
)


def angle_gap(d):
    """``|d|`` wrapped into [0, pi]; depends on ``|d|`` only, so the metric is
    exactly symmetric in floating point."""
    r = np.mod(np.abs(d), 2 * math.pi)
    return np.minimum(r, 2 * math.pi - r)


def as_pose_array(p) -> np.ndarray:
    if isinstance(p, Pose):
        return p.as_array()
    return np.asarray(p, dtype=float)


@dataclass(frozen=True, eq=False)
class CSpace:
    """SE(2) C-space for one robot and environment.

    ``None`` knobs take their defaults from the world scale: ``theta_weight``
    is half the robot half-length (length units per radian), ``edge_resolution``
    1% of the bounds diagonal, ``goal_horizon`` 15% and ``step_size`` 5%.
    """

    robot: RectRobot
    obstacles: tuple[Polygon, ...]
    bounds: Bounds
    theta_weight: float | None = None
    edge_resolution: float | None = None
    goal_horizon: float | None = None
    step_size: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        diag = self.bounds.diagonal
        defaults = {
            "theta_weight": 0.5 * self.robot.half_length,
            "edge_resolution": 0.01 * diag,
            "goal_horizon": 0.15 * diag,
            "step_size": 0.05 * diag,
        }
        for name, val in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, float(val))
        if self.theta_weight < 0:
            raise ValueError("theta_weight must be >= 0")
        for name in ("edge_resolution", "goal_horizon", "step_size"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")

    @cached_property
    def obstacle_set(self) -> ObstacleSet:
        return ObstacleSet(self.obstacles)

    def params(self) -> dict:
        return {
            "theta_weight": self.theta_weight,
            "edge_resolution": self.edge_resolution,
            "goal_horizon": self.goal_horizon,
            "step_size": self.step_size,
        }

    # validity -----------------------------------------------------------

    def valid_many(self, poses: np.ndarray) -> np.ndarray:
        poses = np.asarray(poses, dtype=float).reshape(-1, 3)
        bad = rects_out_of_bounds(self.robot, poses, self.bounds)
        rest = ~bad
        if np.any(rest):
            bad[rest] = self.obstacle_set.rect_collisions(self.robot, poses[rest])
        return ~bad

    def is_valid(self, p) -> bool:
        return bool(self.valid_many(as_pose_array(p)[None, :])[0])

    # metric -------------------------------------------------------------

    def distance(self, a, b) -> float:
        a, b = as_pose_array(a), as_pose_array(b)
        dth = float(angle_gap(b[2] - a[2]))
        return math.hypot(b[0] - a[0], b[1] - a[1]) + self.theta_weight * dth

    def distance_many(self, poses: np.ndarray, p) -> np.ndarray:
        """Distances from each row of ``poses`` to ``p``."""
        p = as_pose_array(p)
        poses = np.asarray(poses, dtype=float).reshape(-1, 3)
        d = poses - p
        dth = angle_gap(d[:, 2])
        return np.hypot(d[:, 0], d[:, 1]) + self.theta_weight * dth

    def rowwise_distance(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        dth = angle_gap(d[:, 2])
        return np.hypot(d[:, 0], d[:, 1]) + self.theta_weight * dth

    def pairwise_distance(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.asarray(a, dtype=float).reshape(-1, 3)
        b = np.asarray(b, dtype=float).reshape(-1, 3)
        d = a[:, None, :] - b[None, :, :]
        dth = angle_gap(d[..., 2])
        return np.hypot(d[..., 0], d[..., 1]) + self.theta_weight * dth

    # interpolation ------------------------------------------------------

    def interpolate(self, a, b, t) -> np.ndarray:
        """Linear in (x, y), shortest arc in theta. ``t`` scalar or array."""
        a, b = as_pose_array(a), as_pose_array(b)
        t = np.asarray(t, dtype=float)
        dth = wrap_angle(b[2] - a[2])
        out = np.empty(t.shape + (3,))
        out[..., 0] = a[0] + t * (b[0] - a[0])
        out[..., 1] = a[1] + t * (b[1] - a[1])
        out[..., 2] = wrap_angle(a[2] + t * dth)
        return out

    def steer(self, a, b, step: float | None = None) -> np.ndarray:
        """Pose at distance ``min(step, d(a, b))`` from ``a`` toward ``b``."""
        step = self.step_size if step is None else step
        a, b = as_pose_array(a), as_pose_array(b)
        d = self.distance(a, b)
        if d <= step:
            return b.copy()
        # distance is linear along the interpolation, so t = step / d is exact
        return self.interpolate(a, b, step / d)

    def local_plan(self, a, b) -> "LocalPlan":
        """Check the straight segment ``a -> b`` at spacing <= edge_resolution.

        The start pose is assumed valid and not re-checked.
        """
        a, b = as_pose_array(a), as_pose_array(b)
        d = self.distance(a, b)
        n = max(1, int(math.ceil(d / self.edge_resolution - 1e-12)))
        ts = np.arange(1, n + 1) / n
        ok = self.valid_many(self.interpolate(a, b, ts))
        if ok.all():
            return LocalPlan(True, None)
        return LocalPlan(False, float(ts[int(np.argmin(ok))]))

    # sampling -----------------------------------------------------------

    def sample_uniform(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        """Uniform over bounds x [-pi, pi); not necessarily valid."""
        size = 1 if n is None else n
        u = rng.random((size, 3))
        bd = self.bounds
        out = np.empty((size, 3))
        out[:, 0] = bd.xmin + u[:, 0] * (bd.xmax - bd.xmin)
        out[:, 1] = bd.ymin + u[:, 1] * (bd.ymax - bd.ymin)
        out[:, 2] = -math.pi + u[:, 2] * 2 * math.pi
        return out[0] if n is None else out

    def sample_valid(self, rng: np.random.Generator, n: int, max_attempts: int) -> np.ndarray:
        got = []
        tried = 0
        while sum(len(g) for g in got) < n:
            if tried >= max_attempts:
                raise RuntimeError(f"could not sample {n} valid poses in {max_attempts} attempts")
            batch = min(max(2 * n, 64), max_attempts - tried)
            cand = self.sample_uniform(rng, batch)
            tried += batch
            got.append(cand[self.valid_many(cand)])
        return np.concatenate(got)[:n]

    def goal_reached(self, p, goal) -> bool:
        """``goal`` is within the horizon of ``p`` and visible by the local planner."""
        if self.distance(p, goal) > self.goal_horizon:
            return False
        return self.local_plan(p, goal).valid


class LocalPlan(NamedTuple):
    valid: bool
    invalid_at: float | None


@dataclass(frozen=True)
class Task:
    start: Pose
    goal: Pose

    def check(self, cs: CSpace) -> None:
        if not cs.is_valid(self.start):
            raise ValueError(f"start {self.start} is not collision-free")
        if not cs.is_valid(self.goal):
            raise ValueError(f"goal {self.goal} is not collision-free")


# environment JSON ---------------------------------------------------------

_OPTIONAL_KEYS = ("theta_weight", "edge_resolution", "goal_horizon", "step_size")


def environment_from_dict(d: dict) -> tuple[CSpace, Task]:
    try:
        bounds = Bounds(*map(float, d["bounds"]))
        robot = RectRobot(float(d["robot"]["half_length"]), float(d["robot"]["half_width"]))
        obstacles = tuple(Polygon(o) for o in d.get("obstacles", []))
        start = Pose(*map(float, d["start"]))
        goal = Pose(*map(float, d["goal"]))
    except (KeyError, TypeError) as exc:
        raise GeometryError(f"malformed environment: {exc!r}") from exc
    opts = {k: float(d[k]) for k in _OPTIONAL_KEYS if d.get(k) is not None}
    return CSpace(robot, obstacles, bounds, **opts), Task(start, goal)


def environment_to_dict(cs: CSpace, task: Task, include_knobs: bool = False) -> dict:
    d = {
        "bounds": cs.bounds.as_list(),
        "robot": {"half_length": cs.robot.half_length, "half_width": cs.robot.half_width},
        "obstacles": [p.points.tolist() for p in cs.obstacles],
        "start": task.start.as_list(),
        "goal": task.goal.as_list(),
    }
    if include_knobs:
        d.update(cs.params())
    return d


def load_environment(path) -> tuple[CSpace, Task]:
    return environment_from_dict(json.loads(Path(path).read_text()))
