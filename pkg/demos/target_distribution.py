"""Grow a small tree on SimplePassage and print the oracle target over its nodes.

    python3 demos/target_distribution.py
"""

import numpy as np

from guidekit.bench.catalog import get_environment
from guidekit.evalmetric import node_scores, oracle_build, target_distribution
from guidekit.guidance import VoronoiGuidance
from guidekit.searchtree import guided_search


def main():
    cs, task = get_environment("simple_passage").build()
    field = oracle_build(cs, task.goal, (64, 64, 16))
    res = guided_search(cs, task, VoronoiGuidance(cs, task), 40, np.random.default_rng(0))
    delta, tau = node_scores(res.tree, task, field)
    tgt = target_distribution(delta, tau, normalize="global", scale=field.max_cost())
    print(f"{len(res.tree)} nodes, gamma {tgt.gamma:.3g}, min prob {tgt.probs.min():.3g}")
    print(" node      x      y  theta   delta    tau   target")
    for v in np.argsort(-tgt.probs)[:10]:
        x, y, th = res.tree.poses[v]
        print(f"{v:5d} {x:6.2f} {y:6.2f} {th:6.2f} {delta[v]:7.3f} {tau[v]:6.3f} {tgt.probs[v]:8.4f}")


if __name__ == "__main__":
    main()
