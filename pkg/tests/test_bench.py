import json

import numpy as np
import pytest
from scipy import stats

from guidekit.bench.catalog import (
    FIXED_NAMES,
    PASSAGE_GAP,
    ROBOT,
    TRAP_LONG,
    TRAP_SHORT,
    catalog,
    environment_names,
    generate_fixed,
    get_environment,
    random_simple_passage,
)
from guidekit.bench.experiments import bootstrap_diff
from guidekit.bench.plot import line_svg, nice_ticks
from guidekit.bench.runner import (
    AGGREGATE_COLUMNS,
    ExperimentConfig,
    SeedResult,
    aggregate,
    read_aggregate,
    run_experiment,
    seed_streams,
)
from guidekit.bench.sweep import run_pathdb_sweep
from guidekit.cli import main
from guidekit.cspace import environment_to_dict
from guidekit.geometry import Pose
from guidekit.guidance import GoalDistanceGuidance, VoronoiGuidance
from guidekit.searchtree import guided_search

SMALL_GRID = (32, 32, 8)


@pytest.fixture(autouse=True)
def private_cache(tmp_path, monkeypatch):
    monkeypatch.setenv("GUIDEKIT_CACHE", str(tmp_path / "cache"))


# catalog

def test_catalog_names():
    assert set(catalog()) == set(FIXED_NAMES)
    assert "random_simple_passage" in environment_names()
    with pytest.raises(ValueError, match="valid"):
        get_environment("nowhere")
    with pytest.raises(ValueError):
        get_environment("random_simple_passage")


@pytest.mark.parametrize("name", FIXED_NAMES)
def test_shipped_json_matches_generator(name):
    # shipped files are the frozen output of the generator
    cs, task = get_environment(name).build()
    want = generate_fixed()[name]
    got = environment_to_dict(cs, task)
    assert got["start"] == pytest.approx(want["start"]) and got["goal"] == pytest.approx(want["goal"])
    assert len(got["obstacles"]) == len(want["obstacles"])
    for a, b in zip(got["obstacles"], want["obstacles"]):
        assert np.allclose(a, b)


@pytest.mark.parametrize("name", FIXED_NAMES)
def test_shared_world_and_valid_task(name):
    cs, task = get_environment(name).build()
    assert (cs.bounds.xmin, cs.bounds.ymin, cs.bounds.xmax, cs.bounds.ymax) == (0, 0, 10, 10)
    assert (cs.robot.half_length, cs.robot.half_width) == (0.6, 0.25)
    assert cs.is_valid(task.start) and cs.is_valid(task.goal)


def test_named_environment_not_shared_state():
    a = get_environment("cup")
    a.data["obstacles"].clear()
    assert get_environment("cup").data["obstacles"]


def test_corridor_widths():
    assert PASSAGE_GAP == pytest.approx(1.5 * 2 * ROBOT["half_width"])
    assert TRAP_SHORT == pytest.approx(0.8 * ROBOT["half_length"])
    assert TRAP_LONG == pytest.approx(3 * 2 * ROBOT["half_width"])
    # the short corridor is narrower than the robot at every heading
    assert TRAP_SHORT < 2 * ROBOT["half_width"]


def test_passage_gap_traversable():
    cs, _ = get_environment("simple_passage").build()
    assert cs.local_plan(Pose(3, 5, 0), Pose(7, 5, 0)).valid
    assert not cs.local_plan(Pose(3, 2, 0), Pose(7, 2, 0)).valid


def test_cup_opens_away_from_goal():
    cs, task = get_environment("cup").build()
    # mouth on the start-goal line: straight in from the start, blocked toward the goal
    assert cs.local_plan(task.start, Pose(5.0, 5, 0)).valid
    assert not cs.local_plan(Pose(5.0, 5, 0), task.goal).valid


def cup_interior(p):
    return 4.0 < p[0] < 6.0 and 3.3 < p[1] < 6.7


def test_cup_greedy_enters_dead_end():
    cs, task = get_environment("cup").build()
    entered = 0
    for i in range(100):
        _, rng = seed_streams(0, i)
        res = guided_search(cs, task, GoalDistanceGuidance(cs, task), 200, rng)
        d = cs.distance_many(res.tree.poses, task.goal.as_array())
        # running argmin over the growing tree
        best = np.minimum.accumulate(d)
        idx = [int(np.flatnonzero(d[: k + 1] == best[k])[0]) for k in range(len(d))]
        entered += any(cup_interior(res.tree.poses[j]) for j in idx)
    assert entered >= 90


def test_random_passage_deterministic():
    a, b = random_simple_passage(11), random_simple_passage(11)
    assert a.data == b.data and a.generator == b.generator
    assert get_environment("random_simple_passage:11").data == a.data
    assert random_simple_passage(12).generator["gap_center"] != a.generator["gap_center"]


def test_random_passage_gap_uniform():
    c = np.array([random_simple_passage(s).generator["gap_center"] for s in range(100)])
    assert c.min() >= 1.0 and c.max() <= 9.0
    counts, _ = np.histogram(c, bins=8, range=(1.0, 9.0))
    assert stats.chisquare(counts).pvalue > 0.001


def test_random_passage_rooms():
    for s in range(10):
        cs, task = random_simple_passage(s).build()
        assert task.start.y == task.goal.y == 5.0
        assert task.start.x == pytest.approx(4.85 / 2) and task.goal.x == pytest.approx((5.15 + 10) / 2)
        g = random_simple_passage(s).generator["gap_center"]
        assert cs.is_valid(Pose(5.0, g, 0)) and not cs.is_valid(Pose(5.0, g + PASSAGE_GAP, 0))


@pytest.mark.slow
def test_random_passage_solvable():
    ok = 0
    for s in range(100):
        cs, task = random_simple_passage(s).build()
        _, rng = seed_streams(0, s)
        ok += guided_search(cs, task, VoronoiGuidance(cs, task), 50_000, rng).success
    assert ok >= 99


# runner

def test_config_validation():
    with pytest.raises(ValueError, match="valid"):
        ExperimentConfig("empty", "nope").validate()
    with pytest.raises(ValueError, match="valid"):
        ExperimentConfig("nowhere", "rrt").validate()
    for bad in ({"seeds": 0}, {"budget": 0}, {"eps": 0}, {"eps": 1.0}, {"tau": -1}, {"metric": "l2"}):
        with pytest.raises(ValueError):
            ExperimentConfig("empty", "rrt", **bad).validate()
    with pytest.raises(ValueError):
        ExperimentConfig("empty", "pathdb").validate()


def seed_result(i, se, success):
    return SeedResult(i, np.array(se, dtype=float), success, len(se), 0.0, 0.0)


def test_aggregate_post_success_zero():
    rs = [seed_result(0, [1.0, 2.0], True), seed_result(1, [3.0, 3.0, 3.0, 3.0], False)]
    mean, stderr, succ = aggregate(rs, 4, 1e-4)
    assert mean.tolist() == [2.0, 2.5, 1.5, 1.5]
    assert succ.tolist() == [0.0, 0.5, 0.5, 0.5]
    assert stderr[0] == pytest.approx(np.std([1.0, 3.0], ddof=1) / np.sqrt(2))


def test_aggregate_rejects_out_of_range():
    with pytest.raises(AssertionError):
        aggregate([seed_result(0, [10.0], False)], 1, 1e-4)


def small_config(out=None, **kw):
    base = dict(env="empty", strategy="rrt", seeds=1, budget=300, grid=SMALL_GRID,
                out=None if out is None else str(out))
    base.update(kw)
    return ExperimentConfig(**base)


def test_smoke_emits_all_files(tmp_path):
    s = run_experiment(small_config(tmp_path / "run"))
    d = tmp_path / "run"
    assert (d / "aggregate.csv").exists() and (d / "se.svg").exists() and (d / "summary.json").exists()
    assert (d / "traces" / "trace_seed0000.csv").exists()
    agg = read_aggregate(d / "aggregate.csv")
    assert list(agg) == AGGREGATE_COLUMNS and len(agg["mean_se"]) == 300
    assert agg["mean_se"] == pytest.approx(s.mean_se)
    summ = json.loads((d / "summary.json").read_text())
    assert summ["success_rate"] == s.success_rate
    assert summ["config"]["env"] == "empty"
    assert "<svg" in (d / "se.svg").read_text()


def test_rerun_bit_identical(tmp_path):
    run_experiment(small_config(tmp_path / "a", seeds=3, env="simple_passage", strategy="voronoi"))
    run_experiment(small_config(tmp_path / "b", seeds=3, env="simple_passage", strategy="voronoi"))
    assert (tmp_path / "a" / "aggregate.csv").read_bytes() == (tmp_path / "b" / "aggregate.csv").read_bytes()


def test_jobs_do_not_change_result(tmp_path):
    a = run_experiment(small_config(seeds=3))
    b = run_experiment(small_config(seeds=3, out=None, jobs=2))
    assert np.array_equal(a.mean_se, b.mean_se)


def test_random_family_runs(tmp_path):
    s = run_experiment(small_config(env="random_simple_passage", seeds=2, budget=50))
    assert len(s.mean_se) == 50 and len(s.samples_to_goal) == 2


def test_summary_bounds(tmp_path):
    s = run_experiment(small_config(env="simple_passage", strategy="goal", seeds=4))
    assert s.mean_se.min() >= 0 and s.mean_se.max() <= np.log(1e4) + 1e-9
    assert np.all((s.samples_to_goal >= 1) & (s.samples_to_goal <= 300))
    assert set(s.params) == {"cspace", "strategy", "evaluation"}


def test_run_header_logs_defaults(caplog):
    import logging
    with caplog.at_level(logging.INFO, logger="guidekit.bench.runner"):
        run_experiment(small_config(budget=20))
    text = caplog.text
    for key in ("step_size", "edge_resolution", "goal_horizon", "eps", "delta", "tau", "normalize"):
        assert key in text


# bootstrap

def test_bootstrap_directions():
    rng = np.random.default_rng(0)
    a, b = rng.normal(1.0, 0.1, 100), rng.normal(0.0, 0.1, 100)
    r = bootstrap_diff(a, b)
    assert r.greater() and not r.less()
    assert bootstrap_diff(b, a).less()
    same = bootstrap_diff(a, a + rng.normal(0, 1e-3, 100))
    assert not same.greater() and not same.less()


# sweep

def test_sweep_nested_prefixes(tmp_path):
    from guidekit.bench.sweep import build_database
    db = build_database(3, seed=0, budget=20000, smooth_attempts=50)
    assert len(db) == 3
    pts = run_pathdb_sweep([1, 3], seeds=2, budget=100, db=db, grid=SMALL_GRID, r_filter=0.375,
                           out=tmp_path / "sw")
    assert [p.size for p in pts] == [1, 3]
    for p in pts:
        assert len(p.whole_run_se) == 2 and p.query_seconds > 0
    data = json.loads((tmp_path / "sw" / "sweep.json").read_text())
    assert data["sizes"] == [1, 3] and data["r_filter"] == 0.375
    assert (tmp_path / "sw" / "sweep.csv").read_text().startswith("size,")
    with pytest.raises(ValueError):
        run_pathdb_sweep([4], seeds=1, budget=10, db=db)
    with pytest.raises(ValueError):
        run_pathdb_sweep([0], seeds=1, budget=10, db=db)


# plot

def test_nice_ticks_cover_range():
    t = nice_ticks(0.0, 9.2)
    assert t == [0, 2, 4, 6, 8]
    t = nice_ticks(0.13, 0.97)
    assert 0.13 <= t[0] and t[-1] <= 0.97 and len(t) >= 3
    assert np.allclose(np.diff(t), t[1] - t[0])


def test_svg_has_band_and_legend():
    m = np.linspace(0, 1, 20)
    svg = line_svg([("a", m, m * 0.1), ("b", m[::-1], m * 0.1)], title="t")
    assert svg.count("<polyline") == 2 and svg.count("<polygon") == 2
    assert ">a<" in svg and ">b<" in svg


# cli

def test_cli_help_and_usage(capsys):
    assert main(["--help"]) == 0
    assert main([]) == 2
    assert main(["run", "--env", "empty"]) == 2


@pytest.mark.parametrize("args", [
    ["run", "--env", "nowhere", "--strategy", "rrt"],
    ["run", "--env", "empty", "--strategy", "nope"],
    ["run", "--env", "empty", "--strategy", "rrt", "--seeds", "0"],
    ["run", "--env", "empty", "--strategy", "rrt", "--metric", "l2"],
    ["run", "--env", "empty", "--strategy", "rrt", "--grid", "12x3"],
    ["run", "--env", "empty", "--strategy", "rrt", "--params", "{not json"],
    ["dbbuild", "--family", "other", "--size", "2"],
    ["dbbuild", "--size", "0"],
    ["sweep-db", "--sizes", "0,1"],
    ["sweep-db", "--r-filter", "0"],
    ["oracle", "--env", "nowhere"],
])
def test_cli_config_errors(tmp_path, capsys, args):
    assert main(args + ["--out", str(tmp_path / "x")]) == 2
    assert "error" in capsys.readouterr().err


def test_cli_run_and_plot(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", "--env", "empty", "--strategy", "rrt", "--seeds", "1", "--budget", "300",
                 "--grid", "32x32x8", "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert 0 <= summary["success_rate"] <= 1
    (out / "se.svg").unlink()
    assert main(["plot", "--in", str(out)]) == 0
    assert (out / "se.svg").exists()
    assert main(["plot", "--in", str(tmp_path)]) == 2


def test_cli_require_success_unsolved(tmp_path):
    args = ["run", "--env", "simple_passage", "--strategy", "rrt", "--seeds", "1", "--budget", "2",
            "--grid", "32x32x8", "--no-traces", "--out", str(tmp_path / "r")]
    assert main(args) == 0
    assert main(args + ["--require-success"]) == 3


def test_cli_oracle(tmp_path, capsys):
    from guidekit.evalmetric import load_oracle
    out = tmp_path / "o.npz"
    assert main(["oracle", "--env", "empty", "--grid", "32x32x8", "--out", str(out)]) == 0
    field = load_oracle(out)
    # the goal-aligned lattice may add one cell per axis to keep the requested spacing
    assert field.shape[2] == 8 and 32 <= field.shape[0] <= 33 and 32 <= field.shape[1] <= 33
