"""``guidekit`` command line.

Exit codes: 0 success, 2 configuration error, 3 unsolved within budget
(``run --require-success`` only).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_UNSOLVED = 0, 2, 3


class ConfigError(Exception):
    pass


def _grid(text: str) -> tuple[int, int, int]:
    try:
        parts = tuple(int(p) for p in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}, expected NXxNYxNT") from None
    if len(parts) != 3 or min(parts) < 1:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}, expected NXxNYxNT")
    return parts


def _sizes(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def _params(text: str | None) -> dict:
    if not text:
        return {}
    p = Path(text)
    raw = p.read_text() if p.exists() else text
    try:
        d = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"--params is neither a JSON file nor JSON text: {exc}") from exc
    if not isinstance(d, dict):
        raise ConfigError("--params must be a JSON object keyed by strategy name")
    return d


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="guidekit", description="Guided motion planning benchmarks")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one strategy on one environment over many seeds")
    r.add_argument("--env", required=True)
    r.add_argument("--strategy", required=True)
    r.add_argument("--seeds", type=int, default=128)
    r.add_argument("--budget", type=int, default=5000)
    r.add_argument("--metric", default="nll")
    r.add_argument("--eps", type=float, default=1e-4)
    r.add_argument("--delta", type=float, default=0.1)
    r.add_argument("--tau", type=float, default=0.1)
    r.add_argument("--normalize", default="minmax", choices=["minmax", "max", "global"])
    r.add_argument("--grid", type=_grid, default=(128, 128, 32))
    r.add_argument("--params", help="strategy knobs as JSON text or a JSON file")
    r.add_argument("--db", help="path database file (pathdb strategies)")
    r.add_argument("--base-seed", type=int, default=0)
    r.add_argument("--jobs", type=int, default=1)
    r.add_argument("--no-traces", action="store_true")
    r.add_argument("--require-success", action="store_true",
                   help="exit 3 unless every seed reaches the goal")
    r.add_argument("--out", required=True)

    b = sub.add_parser("dbbuild", help="build a path database")
    b.add_argument("--family", default="random_simple_passage")
    b.add_argument("--size", type=int, required=True)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--budget", type=int, default=20000)
    b.add_argument("--out", required=True)

    s = sub.add_parser("sweep-db", help="evaluate pathdb guidance over database sizes")
    s.add_argument("--sizes", type=_sizes, default=[1, 4, 16, 64, 256])
    s.add_argument("--seeds", type=int, default=64)
    s.add_argument("--budget", type=int, default=5000)
    s.add_argument("--db", help="prebuilt database (default: build one of the largest size)")
    s.add_argument("--db-seed", type=int, default=0)
    s.add_argument("--eps", type=float, default=1e-4)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--tau", type=float, default=0.1)
    s.add_argument("--normalize", default="minmax", choices=["minmax", "max", "global"])
    s.add_argument("--r-filter", type=float, help="path filtering radius (default 2 * step size)")
    s.add_argument("--out", required=True)

    o = sub.add_parser("oracle", help="build (or load from cache) an oracle field")
    o.add_argument("--env", required=True)
    o.add_argument("--grid", type=_grid, default=(128, 128, 32))
    o.add_argument("--out", required=True)

    p = sub.add_parser("plot", help="regenerate SVGs from aggregate CSVs")
    p.add_argument("--in", dest="inp", required=True, nargs="+",
                   help="run directories; several are overlaid in one plot")
    p.add_argument("--out", help="output SVG (default: se.svg inside the single input directory)")
    return ap


def cmd_run(a) -> int:
    from .bench.runner import ExperimentConfig, run_experiment
    cfg = ExperimentConfig(env=a.env, strategy=a.strategy, seeds=a.seeds, budget=a.budget,
                           metric=a.metric, eps=a.eps, delta=a.delta, tau=a.tau,
                           normalize=a.normalize, params=_params(a.params), out=a.out,
                           grid=a.grid, base_seed=a.base_seed, jobs=a.jobs, db_path=a.db,
                           write_traces=not a.no_traces)
    try:
        cfg.validate()
    except (ValueError, FileNotFoundError) as exc:
        raise ConfigError(str(exc)) from exc
    summary = run_experiment(cfg)
    print(json.dumps({k: summary.to_json()[k] for k in
                      ("success_rate", "mean_samples_to_goal", "mean_whole_run_se", "curve_argmax")}))
    if a.require_success and summary.success_rate < 1.0:
        return EXIT_UNSOLVED
    return EXIT_OK


def cmd_dbbuild(a) -> int:
    from .bench.sweep import build_database
    if a.family != "random_simple_passage":
        raise ConfigError(f"unknown family {a.family!r}; valid: random_simple_passage")
    if a.size < 1:
        raise ConfigError("--size must be >= 1")
    db = build_database(a.size, a.seed, a.budget)
    db.save(a.out)
    print(f"wrote {len(db)} entries to {a.out}")
    return EXIT_OK


def cmd_sweep(a) -> int:
    from .bench.sweep import run_pathdb_sweep
    from .strategies.pathdb import PathDatabase
    if not a.sizes or min(a.sizes) < 1:
        raise ConfigError("--sizes must be positive integers")
    if a.r_filter is not None and not a.r_filter > 0:
        raise ConfigError("--r-filter must be > 0")
    db = PathDatabase.load(a.db) if a.db else None
    points = run_pathdb_sweep(a.sizes, a.seeds, a.budget, db=db, db_seed=a.db_seed, eps=a.eps,
                              delta=a.delta, tau=a.tau, normalize=a.normalize,
                              r_filter=a.r_filter, out=a.out)
    for p in points:
        print(f"size {p.size:4d}  whole-run SE {p.whole_run_se.mean():.4f}  "
              f"success {p.success.mean():.3f}  query {p.query_seconds * 1e6:.2f} us")
    return EXIT_OK


def cmd_oracle(a) -> int:
    from .bench.catalog import get_environment
    from .bench.runner import cache_dir
    from .evalmetric import cached_oracle, save_oracle
    try:
        cs, task = get_environment(a.env).build()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    field = cached_oracle(cs, task.goal, a.grid, cache_dir())
    save_oracle(field, a.out)
    fin = np.isfinite(field.cost)
    print(f"oracle {field.shape} reachable cells {int(fin.sum())} -> {a.out}")
    return EXIT_OK


def cmd_plot(a) -> int:
    from .bench.plot import write_se_svg
    from .bench.runner import read_aggregate
    curves = []
    for d in a.inp:
        path = Path(d) / "aggregate.csv"
        if not path.exists():
            raise ConfigError(f"no aggregate.csv in {d}")
        agg = read_aggregate(path)
        label = Path(d).name
        summ = Path(d) / "summary.json"
        if summ.exists():
            c = json.loads(summ.read_text())["config"]
            label = f"{c['strategy']} / {c['env']}"
        curves.append((label, agg["mean_se"], agg["stderr"]))
    if a.out is None and len(a.inp) != 1:
        raise ConfigError("--out is required when plotting several directories")
    out = Path(a.out) if a.out else Path(a.inp[0]) / "se.svg"
    write_se_svg(out, curves, title="mean sampling efficiency")
    print(f"wrote {out}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "dbbuild": cmd_dbbuild, "sweep-db": cmd_sweep,
            "oracle": cmd_oracle, "plot": cmd_plot}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage, 0 on --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return COMMANDS[a.command](a)
    except ConfigError as exc:
        print(f"guidekit: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
