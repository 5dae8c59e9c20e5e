"""Small path-database sweep: SE and query time against database size.

    python3 demos/pathdb_sweep.py --out /tmp/sweep
"""

import argparse

from guidekit.bench.experiments import REFERENCE_PARAMS
from guidekit.bench.sweep import run_pathdb_sweep


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="1,4,16")
    ap.add_argument("--seeds", type=int, default=8)
    ap.add_argument("--budget", type=int, default=2000)
    ap.add_argument("--out", default="sweep_out")
    a = ap.parse_args()
    sizes = [int(s) for s in a.sizes.split(",")]
    for p in run_pathdb_sweep(sizes, a.seeds, a.budget, normalize="global",
                              r_filter=REFERENCE_PARAMS["pathdb"]["r_filter"], out=a.out):
        print(f"size {p.size:4d}  whole-run SE {p.whole_run_se.mean():.3f}  "
              f"success {p.success.mean():.2f}  query {p.query_seconds * 1e6:.2f} us")


if __name__ == "__main__":
    main()
