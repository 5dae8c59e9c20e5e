"""Named benchmark environments.

The fixed families ship as versioned JSON under ``guidekit/envs`` so results
stay comparable across releases; :func:`random_simple_passage` generates the
randomized family on demand.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from ..cspace import CSpace, Task, environment_from_dict, environment_to_dict

CATALOG_VERSION = 1
FIXED_NAMES = ("empty", "simple_passage", "cup", "trap", "trap_cup")
FAMILY_NAMES = ("random_simple_passage",)

# shared world: [0, 10]^2, robot half extents (0.6, 0.25)
WORLD = [0.0, 0.0, 10.0, 10.0]
ROBOT = {"half_length": 0.6, "half_width": 0.25}
ROBOT_WIDTH = 2 * ROBOT["half_width"]
PASSAGE_GAP = 1.5 * ROBOT_WIDTH          # 0.75
WALL_X = (4.85, 5.15)          # 0.3 thick


@dataclass
class EnvironmentSpec:
    name: str
    data: dict
    generator: dict = field(default_factory=dict)

    def build(self) -> tuple[CSpace, Task]:
        return environment_from_dict(self.data)

    @property
    def cspace(self) -> CSpace:
        return self.build()[0]

    @property
    def task(self) -> Task:
        return self.build()[1]


def box(x0, y0, x1, y1) -> list[list[float]]:
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def wall_with_gaps(x0, x1, gaps, ymin=0.0, ymax=10.0) -> list:
    """Vertical wall over [ymin, ymax] with open intervals ``gaps``."""
    out, y = [], ymin
    for lo, hi in sorted(gaps):
        if lo > y:
            out.append(box(x0, y, x1, lo))
        y = hi
    if y < ymax:
        out.append(box(x0, y, x1, ymax))
    return out


def cup(mouth_x, back_x, y0, y1, t=0.3) -> list[list[float]]:
    """C-shaped polygon opening toward -x, mouth at ``mouth_x``."""
    return [[mouth_x, y0], [back_x + t, y0], [back_x + t, y1], [mouth_x, y1],
            [mouth_x, y1 - t], [back_x, y1 - t], [back_x, y0 + t], [mouth_x, y0 + t]]


def _env(obstacles, start=(2.0, 5.0, 0.0), goal=(8.0, 5.0, 0.0)) -> dict:
    return {"version": CATALOG_VERSION, "bounds": WORLD, "robot": dict(ROBOT),
            "obstacles": obstacles, "start": list(start), "goal": list(goal)}


def simple_passage_dict(gap_center: float = 5.0, start=(2.0, 5.0, 0.0), goal=(8.0, 5.0, 0.0)) -> dict:
    g = PASSAGE_GAP / 2
    return _env(wall_with_gaps(*WALL_X, [(gap_center - g, gap_center + g)]), start, goal)


TRAP_SHORT = 0.8 * ROBOT["half_length"]   # 0.48 < robot width 0.5: blocked at every theta
TRAP_LONG = 3 * ROBOT_WIDTH               # 1.5


def trap_wall(x0, x1, long_lo=8.0) -> list:
    """Thick wall with the blocked short corridor centred on y = 5 and the
    wide corridor starting at ``long_lo``."""
    s = TRAP_SHORT / 2
    return wall_with_gaps(x0, x1, [(5.0 - s, 5.0 + s), (long_lo, long_lo + TRAP_LONG)])


def generate_fixed() -> dict[str, dict]:
    """Source of truth for the shipped JSON files."""
    return {
        "empty": _env([]),
        "simple_passage": simple_passage_dict(),
        "cup": _env([cup(4.0, 6.0, 3.0, 7.0)]),
        "trap": _env(trap_wall(4.5, 5.5)),
        # the cup opens back toward the trap; its top merges with the world edge,
        # so the only way round it is below
        "trap_cup": _env(trap_wall(3.0, 4.0) + [cup(5.5, 7.5, 4.0, 10.0)],
                         start=(1.5, 5.0, 0.0), goal=(8.5, 5.0, 0.0)),
    }


@lru_cache(maxsize=None)
def _load_fixed(name: str) -> dict:
    text = resources.files("guidekit.envs").joinpath(f"{name}.json").read_text()
    return json.loads(text)


def random_simple_passage(seed: int) -> EnvironmentSpec:
    """Two rooms split by the central wall; the gap center is uniform over the
    wall's middle 80%. Start and goal sit at the room centers."""
    rng = np.random.default_rng(seed)
    lo, hi = 0.1 * 10.0, 0.9 * 10.0
    center = float(rng.uniform(lo, hi))
    left = WALL_X[0] / 2
    right = (WALL_X[1] + 10.0) / 2
    d = simple_passage_dict(center, start=(left, 5.0, 0.0), goal=(right, 5.0, 0.0))
    return EnvironmentSpec("random_simple_passage", d, {"seed": int(seed), "gap_center": center})


def random_simple_passage_env(seed: int) -> tuple[CSpace, Task]:
    return random_simple_passage(seed).build()


def catalog() -> dict[str, EnvironmentSpec]:
    return {n: EnvironmentSpec(n, copy.deepcopy(_load_fixed(n))) for n in FIXED_NAMES}


def environment_names() -> list[str]:
    return list(FIXED_NAMES) + list(FAMILY_NAMES)


def get_environment(name: str, seed: int | None = None) -> EnvironmentSpec:
    """Look up a fixed environment, or ``random_simple_passage`` (``seed``
    required, or ``random_simple_passage:<seed>``)."""
    if name.startswith("random_simple_passage"):
        _, _, s = name.partition(":")
        if s:
            seed = int(s)
        if seed is None:
            raise ValueError("random_simple_passage needs a seed")
        return random_simple_passage(seed)
    if name not in FIXED_NAMES:
        raise ValueError(f"unknown environment {name!r}; valid: {', '.join(environment_names())}")
    # callers get their own copy so the shipped definition stays immutable
    return EnvironmentSpec(name, copy.deepcopy(_load_fixed(name)))


def write_catalog(directory) -> None:
    from pathlib import Path
    d = Path(directory)
    for name, data in generate_fixed().items():
        cs, task = environment_from_dict(data)
        task.check(cs)
        out = environment_to_dict(cs, task)
        out = {"name": name, "version": CATALOG_VERSION, **out}
        (d / f"{name}.json").write_text(json.dumps(out, indent=1) + "\n")
