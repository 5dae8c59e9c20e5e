"""Run several guidances on one environment and overlay their mean SE curves.

    python3 demos/compare_strategies.py --env trap_cup --seeds 16 --out /tmp/compare
"""

import argparse
from pathlib import Path

from guidekit.bench.experiments import run_reference
from guidekit.bench.plot import write_se_svg

STRATEGIES = ["uniform", "voronoi", "lazyprm", "medialaxis", "hybrid:medialaxis+lazyprm"]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--env", default="trap_cup")
    ap.add_argument("--seeds", type=int, default=16)
    ap.add_argument("--budget", type=int, default=2000)
    ap.add_argument("--out", default="compare_out")
    a = ap.parse_args()
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    curves = []
    for s in STRATEGIES:
        summ = run_reference(a.env, s, seeds=a.seeds, budget=a.budget)
        print(f"{s:28s} success {summ.success_rate:.2f}  samples-to-goal {summ.mean_samples_to_goal:7.1f}  "
              f"whole-run SE {summ.whole_run_se.mean():.3f}  curve max at {summ.curve_argmax()}")
        curves.append((s, summ.mean_se, summ.stderr))
    write_se_svg(out / "compare.svg", curves, title=f"{a.env}, {a.seeds} seeds")
    print(f"wrote {out / 'compare.svg'}")


if __name__ == "__main__":
    main()
