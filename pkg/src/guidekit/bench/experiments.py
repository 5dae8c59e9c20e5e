"""Reference experiments for the qualitative guidance comparisons.

All comparisons share one evaluation setup and one set of strategy knobs
(``REFERENCE_PARAMS``), so a strategy behaves identically in every
environment it is compared on. The knobs differ from the library defaults;
see the README for why.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .runner import ExperimentConfig, RunSummary, run_experiment

log = logging.getLogger(__name__)

REFERENCE_SEEDS = 128
REFERENCE_BUDGET = 5000
REFERENCE_NORMALIZE = "global"

REFERENCE_PARAMS = {
    # dense, well connected roadmap; deletions only right at the collision
    "lazyprm": {"n_vertices": 3000, "k_neighbors": 50, "r_del": 0.1, "r_edge": 0.1},
    # gentle re-weighting: a skeleton route keeps being trusted for a while
    "medialaxis": {"w_penalty": 1.05},
    # half the passage gap: a collision rules out paths crossing the wall at
    # that spot, not every passage within a step or two of it
    "pathdb": {"r_filter": 0.375},
}


def reference_config(env: str, strategy: str, seeds: int = REFERENCE_SEEDS,
                     budget: int = REFERENCE_BUDGET, out=None, **kw) -> ExperimentConfig:
    return ExperimentConfig(env=env, strategy=strategy, seeds=seeds, budget=budget,
                            normalize=REFERENCE_NORMALIZE, params=REFERENCE_PARAMS, out=out,
                            write_traces=out is not None, **kw)


def run_reference(env: str, strategy: str, seeds: int = REFERENCE_SEEDS, **kw) -> RunSummary:
    return run_experiment(reference_config(env, strategy, seeds, **kw))


@dataclass
class BootstrapResult:
    diff: float          # mean(a) - mean(b)
    lower: float         # one-sided lower bound at the given level
    upper: float         # one-sided upper bound at the given level

    def greater(self) -> bool:
        """mean(a) > mean(b) at the chosen confidence."""
        return self.lower > 0.0

    def less(self) -> bool:
        return self.upper < 0.0

    def not_greater(self) -> bool:
        return self.upper <= 0.0


def bootstrap_diff(a, b, n_boot: int = 10000, level: float = 0.95, seed: int = 0) -> BootstrapResult:
    """Percentile bootstrap of mean(a) - mean(b), resampling each group independently."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    rng = np.random.default_rng(seed)
    ia = rng.integers(len(a), size=(n_boot, len(a)))
    ib = rng.integers(len(b), size=(n_boot, len(b)))
    d = a[ia].mean(axis=1) - b[ib].mean(axis=1)
    lo, hi = np.quantile(d, [1.0 - level, level])
    return BootstrapResult(float(a.mean() - b.mean()), float(lo), float(hi))
