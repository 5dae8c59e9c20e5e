"""Guided sampling-based motion planning.

A search tree grows in an SE(2) configuration space; a guiding space picks
which node to expand and toward what. ``evalmetric`` scores every selection
against an oracle-derived target distribution.
"""

from .cspace import CSpace, Task, environment_from_dict, load_environment
from .evalmetric import (
    OracleField,
    evaluate_run,
    js_divergence,
    kl_divergence,
    oracle_build,
    target_distribution,
)
from .geometry import Bounds, Polygon, Pose, RectRobot
from .guidance import GoalDistanceGuidance, GuidingSpace, Selection, UniformGuidance, VoronoiGuidance
from .searchtree import SearchResult, SearchTree, guided_search
from .strategies import make_guidance

__version__ = "0.1.0"

__all__ = [
    "Bounds", "CSpace", "GoalDistanceGuidance", "GuidingSpace", "OracleField", "Polygon", "Pose",
    "RectRobot", "SearchResult", "SearchTree", "Selection", "Task", "UniformGuidance",
    "VoronoiGuidance", "environment_from_dict", "evaluate_run", "guided_search", "js_divergence",
    "kl_divergence", "load_environment", "make_guidance", "oracle_build", "target_distribution",
]
