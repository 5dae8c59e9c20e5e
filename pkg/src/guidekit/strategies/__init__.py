"""Guidance strategies and the name registry used by the experiment runner."""

from __future__ import annotations

import numpy as np

from ..guidance import GoalDistanceGuidance, GuidingSpace, UniformGuidance, VoronoiGuidance
from .hybrid import HybridGuidance
from .lazyprm import LazyPRMGuidance, LazyRoadmap, lazy_build
from .medialaxis import MedialAxisGuidance, SkeletonGraph, skeleton_extract
from .pathdb import (
    PathDatabase,
    PathDatabaseGuidance,
    PathEntry,
    db_build,
    shortcut_smooth,
)

BASE_STRATEGIES = ("uniform", "goal", "voronoi", "rrt", "lazyprm", "medialaxis", "pathdb")


def strategy_names() -> list[str]:
    return list(BASE_STRATEGIES) + ["hybrid:<name>+<name>"]


def validate_strategy(name: str) -> None:
    if name.startswith("hybrid:"):
        parts = name[len("hybrid:"):].split("+")
        if not parts or not all(parts):
            raise ValueError(f"malformed hybrid name {name!r}")
        for p in parts:
            validate_strategy(p)
        return
    if name not in BASE_STRATEGIES:
        raise ValueError(f"unknown strategy {name!r}; valid: {', '.join(strategy_names())}")


def make_guidance(name: str, cs, task, rng: np.random.Generator | None = None,
                  params: dict | None = None, db: PathDatabase | None = None) -> GuidingSpace:
    """Build a guidance by name.

    ``params`` maps a strategy name to its keyword arguments, e.g.
    ``{"lazyprm": {"n_vertices": 300}}``. ``rng`` feeds any randomized
    construction (roadmap sampling).
    """
    validate_strategy(name)
    params = params or {}
    if name.startswith("hybrid:"):
        members = [make_guidance(p, cs, task, rng, params, db) for p in name[len("hybrid:"):].split("+")]
        return HybridGuidance(members)
    kw = dict(params.get(name, {}))
    if name == "uniform":
        return UniformGuidance(cs, task)
    if name == "goal":
        return GoalDistanceGuidance(cs, task, **kw)
    if name in ("voronoi", "rrt"):
        return VoronoiGuidance(cs, task, **kw)
    if name == "lazyprm":
        return LazyPRMGuidance(cs, task, rng=rng, **kw)
    if name == "medialaxis":
        return MedialAxisGuidance(cs, task, **kw)
    if name == "pathdb":
        if db is None:
            raise ValueError("pathdb guidance needs a path database")
        return PathDatabaseGuidance(cs, task, db, **kw)
    raise AssertionError(name)


__all__ = [
    "HybridGuidance", "LazyPRMGuidance", "LazyRoadmap", "lazy_build", "MedialAxisGuidance",
    "SkeletonGraph", "skeleton_extract", "PathDatabase", "PathDatabaseGuidance", "PathEntry",
    "db_build", "shortcut_smooth", "make_guidance", "strategy_names", "validate_strategy",
]
