import math

import numpy as np
import pytest
import shapely
from hypothesis import given, settings
from hypothesis import strategies as st

from guidekit.bench.catalog import get_environment
from guidekit.geometry import (
    Bounds,
    GeometryError,
    ObstacleSet,
    Polygon,
    Pose,
    RectRobot,
    convex_overlap,
    rasterize,
    rect_corners,
    rect_corners_array,
    rect_polygon,
    robot_in_collision,
    triangulate,
    wrap_angle,
)

WORLD = Bounds(0, 0, 10, 10)


def corner_set(corners):
    return sorted((round(c.x, 9), round(c.y, 9)) for c in corners)


def square(cx, cy, half=0.5):
    return rect_polygon(cx - half, cy - half, cx + half, cy + half)


def boundary_points(pts, n):
    """``n`` points spread along a closed polyline."""
    pts = np.asarray(pts, dtype=float)
    seg = np.roll(pts, -1, axis=0) - pts
    lens = np.hypot(seg[:, 0], seg[:, 1])
    s = np.linspace(0, lens.sum(), n, endpoint=False)
    cum = np.concatenate([[0], np.cumsum(lens)])
    k = np.searchsorted(cum, s, side="right") - 1
    t = (s - cum[k]) / lens[k]
    return pts[k] + t[:, None] * seg[k]


def inside_convex(poly_pts, q):
    """Closed containment of points ``q`` in a CCW convex polygon."""
    v = np.asarray(poly_pts)
    e = np.roll(v, -1, axis=0) - v
    cr = e[None, :, 0] * (q[:, None, 1] - v[None, :, 1]) - e[None, :, 1] * (q[:, None, 0] - v[None, :, 0])
    return np.all(cr >= -1e-12, axis=1)


def sampled_overlap(a_pts, b_pts, n=1000):
    """Dense boundary-sampling oracle for two convex polygons."""
    pa, pb = boundary_points(a_pts, n), boundary_points(b_pts, n)
    return bool(inside_convex(b_pts, pa).any() or inside_convex(a_pts, pb).any())


# rect_corners

def test_rect_corners_axis_aligned():
    c = rect_corners(RectRobot(1, 0.5), Pose(0, 0, 0))
    assert corner_set(c) == corner_set([Pose(1, 0.5).position, Pose(-1, 0.5).position,
                                        Pose(-1, -0.5).position, Pose(1, -0.5).position])


def test_rect_corners_quarter_turn():
    c = rect_corners(RectRobot(1, 0.5), Pose(0, 0, math.pi / 2))
    want = [(-0.5, 1), (-0.5, -1), (0.5, -1), (0.5, 1)]
    assert corner_set(c) == sorted((round(x, 9), round(y, 9)) for x, y in want)


def test_rect_corners_rotated_distance():
    for c in rect_corners(RectRobot(1, 1), Pose(3, 4, math.pi / 4)):
        assert math.hypot(c.x - 3, c.y - 4) == pytest.approx(math.sqrt(2), abs=1e-12)


def test_rect_corners_counter_clockwise():
    c = rect_corners_array(RectRobot(0.6, 0.25), np.array([[1.0, 2.0, 0.7]]))[0]
    area = 0.5 * np.sum(c[:, 0] * np.roll(c[:, 1], -1) - np.roll(c[:, 0], -1) * c[:, 1])
    assert area == pytest.approx(4 * 0.6 * 0.25)


# convex_overlap

def test_convex_overlap_disjoint():
    assert not convex_overlap(square(0, 0), square(3, 0))


def test_convex_overlap_identical():
    assert convex_overlap(square(0, 0), square(0, 0))


def test_convex_overlap_nearly_touching_matches_sampling():
    a, b = square(0, 0), square(0.99, 0)
    assert convex_overlap(a, b)
    assert sampled_overlap(a.points, b.points)


def test_convex_overlap_touching_counts():
    assert convex_overlap(square(0, 0), square(1.0, 0))


def test_convex_overlap_rejects_nonconvex():
    l_shape = Polygon([(0, 0), (2, 0), (2, 1), (1, 1), (1, 2), (0, 2)])
    with pytest.raises(GeometryError):
        convex_overlap(l_shape, square(0, 0))


@settings(max_examples=200, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 2), st.floats(0, 2 * math.pi))
def test_convex_overlap_symmetric(dx, dy, half, th):
    corners = rect_corners_array(RectRobot(half, 0.4), np.array([[dx, dy, th]]))[0]
    a, b = square(0, 0), Polygon(corners)
    assert convex_overlap(a, b) == convex_overlap(b, a)


# polygons

def test_polygon_reorders_clockwise_input():
    p = Polygon([(0, 0), (0, 1), (1, 1), (1, 0)])
    assert p.area > 0


@pytest.mark.parametrize("pts", [
    [(0, 0), (1, 1)],
    [(0, 0), (1, 0), (2, 0)],
    [(0, 0), (2, 2), (2, 0), (0, 2)],
])
def test_polygon_rejects_degenerate(pts):
    with pytest.raises(GeometryError):
        Polygon(pts)


def test_triangulation_preserves_area():
    cup = get_environment("cup").build()[0].obstacles[0]
    tris = triangulate(cup)
    assert sum(t.area for t in tris) == pytest.approx(cup.area, rel=1e-12)
    assert all(t.is_convex for t in tris)


def test_wrap_angle_range():
    th = wrap_angle(np.linspace(-20, 20, 1001))
    assert th.min() >= -math.pi and th.max() < math.pi
    assert wrap_angle(math.pi) == -math.pi


# robot_in_collision

ROBOT = RectRobot(0.6, 0.25)


def test_no_obstacles_inside_bounds_is_free():
    assert not robot_in_collision(ROBOT, Pose(5, 5, 0.3), [], WORLD)


def test_pose_inside_obstacle_collides():
    assert robot_in_collision(ROBOT, Pose(5, 5, 0), [square(5, 5, 2)], WORLD)


def test_out_of_bounds_collides():
    assert robot_in_collision(ROBOT, Pose(0.3, 5, 0), [], WORLD)


def test_rotated_near_corner_matches_sampling_oracle():
    obstacle = rect_polygon(4, 4, 6, 6)
    rng = np.random.default_rng(3)
    th = math.radians(30)
    for _ in range(300):
        # centers scattered around the corner (6, 6)
        x, y = 6 + rng.uniform(-0.2, 0.9, 2)
        pose = Pose(x, y, th)
        corners = rect_corners_array(ROBOT, pose.as_array()[None])[0]
        want = sampled_overlap(corners, obstacle.points, n=10000)
        got = robot_in_collision(ROBOT, pose, [obstacle], Bounds(0, 0, 20, 20))
        if got != want:
            sep = shapely.Polygon(corners).distance(shapely.Polygon(obstacle.points))
            assert sep < 1e-6


def test_collision_agrees_with_exact_oracle_on_random_pairs():
    rng = np.random.default_rng(11)
    big = Bounds(-100, -100, 100, 100)
    obs = []
    for _ in range(50):
        c = rng.uniform(-3, 3, 2)
        k = rng.integers(3, 7)
        ang = np.sort(rng.uniform(0, 2 * math.pi, k))
        r = rng.uniform(0.3, 1.5)
        obs.append(Polygon(np.stack([c[0] + r * np.cos(ang), c[1] + r * np.sin(ang)], 1)))
    disagree = 0
    for i in range(10000):
        poly = obs[i % len(obs)]
        pose = np.array([*rng.uniform(-5, 5, 2), rng.uniform(-math.pi, math.pi)])
        got = bool(ObstacleSet([poly]).rect_collisions(ROBOT, pose[None])[0]) if i < 200 else None
        corners = rect_corners_array(ROBOT, pose[None])[0]
        a, b = shapely.Polygon(corners), shapely.Polygon(poly.points)
        want = a.intersects(b)
        if got is None:
            got = robot_in_collision(ROBOT, Pose(*pose), [poly], big)
        if got != want:
            disagree += 1
            assert a.distance(b) < 1e-6 or a.intersection(b).area < 1e-12
    assert disagree <= 5


@settings(max_examples=100, deadline=None)
@given(st.floats(0.5, 9.5), st.floats(0.5, 9.5), st.floats(-math.pi, math.pi), st.integers(-3, 3))
def test_collision_invariant_under_full_turns(x, y, th, k):
    cs = get_environment("trap").build()[0]
    a = cs.is_valid(np.array([x, y, th]))
    b = cs.is_valid(np.array([x, y, th + 2 * math.pi * k]))
    assert a == b


# rasterize

def test_rasterize_empty():
    g = rasterize([], WORLD, 0.5)
    assert g.occupied.shape == (20, 20) and not g.occupied.any()


def test_rasterize_left_half():
    g = rasterize([rect_polygon(0, 0, 5, 10)], WORLD, 0.1)
    xs, _ = g.cell_centers()
    left = xs < 5 - 0.1
    right = xs > 5 + 0.1
    assert g.occupied[:, left].all()
    assert not g.occupied[:, right].any()


def test_rasterize_cup_area_fraction():
    cs = get_environment("cup").build()[0]
    g = rasterize(cs.obstacle_set, cs.bounds, 0.01)
    want = sum(p.area for p in cs.obstacles) / cs.bounds.area
    assert g.occupied.mean() == pytest.approx(want, rel=0.02)
