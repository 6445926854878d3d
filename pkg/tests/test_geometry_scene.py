import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import straight_traj
from pdmlab.geometry import (
    GeometryError, as_polygon, convex_hull, hull_area, point_in_polygon, points_in_polygon, polygon_distance,
    polygons_intersect, rectangle, wrap_angle,
)
from pdmlab.scene import (
    Centerline, Pose2D, Trajectory, ego_footprint, footprints_along, pairwise_l1, project_to_centerline,
    station_lateral_to_cartesian, trajectory_l1,
)

UNIT = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], float)


def test_wrap_angle_identity_at_zero():
    assert wrap_angle(0.0) == 0.0


@given(st.floats(-1e4, 1e4))
def test_wrap_angle_range_and_congruence(a):
    w = wrap_angle(a)
    assert -math.pi < w <= math.pi
    assert abs(math.remainder(w - a, 2 * math.pi)) < 1e-8


@pytest.mark.parametrize("shift, expected", [((2, 0), False), ((0.5, 0), True), ((1, 0), True), ((0.5, 0.5), True)])
def test_square_intersection(shift, expected):
    assert polygons_intersect(UNIT, UNIT + np.array(shift)) is expected


def _sampled_overlap(a, b, n=120):
    xs = np.linspace(min(a[:, 0].min(), b[:, 0].min()), max(a[:, 0].max(), b[:, 0].max()), n)
    ys = np.linspace(min(a[:, 1].min(), b[:, 1].min()), max(a[:, 1].max(), b[:, 1].max()), n)
    pts = np.array([(x, y) for x in xs for y in ys])
    return bool(np.any(points_in_polygon(pts, a) & points_in_polygon(pts, b)))


@settings(max_examples=60, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-math.pi, math.pi))
def test_intersection_matches_dense_sampling(dx, dy, h):
    a = rectangle(0, 0, 0, 2, 1)
    b = rectangle(dx, dy, h, 2, 1)
    sampled = _sampled_overlap(a, b)
    # sampling can miss slivers, never invent overlap
    if sampled:
        assert polygons_intersect(a, b)
    if polygon_distance(a, b) > 0.1:
        assert not polygons_intersect(a, b)


def test_degenerate_polygon_rejected():
    with pytest.raises(GeometryError):
        as_polygon([[0, 0], [1, 1], [2, 2]])


def test_point_in_polygon_and_distance():
    assert point_in_polygon((0.5, 0.5), UNIT)
    assert not point_in_polygon((1.5, 0.5), UNIT)
    assert polygon_distance(UNIT, UNIT + [3, 0]) == pytest.approx(2.0)


def test_hull_of_square_with_interior_points():
    pts = np.vstack([UNIT, [[0.5, 0.5], [0.2, 0.7]]])
    assert len(convex_hull(pts)) == 4
    assert hull_area(pts) == pytest.approx(1.0)
    assert hull_area([[0, 0], [1, 1], [2, 2]]) == 0.0


@pytest.mark.parametrize("cl, station, lateral, pose", [
    ([[0, 0], [50, 0]], 5, 0, (5, 0, 0)),
    ([[0, 0], [50, 0]], 5, 2, (5, 2, 0)),
    ([[0, 0], [0, 50]], 3, 1, (-1, 3, math.pi / 2)),
])
def test_station_lateral_examples(cl, station, lateral, pose):
    p = station_lateral_to_cartesian(Centerline(cl), station, lateral)
    assert p.as_tuple() == pytest.approx(pose, abs=1e-12)


@pytest.mark.parametrize("cl, point, expected", [
    ([[0, 0], [50, 0]], (5, 2), (5, 2)),
    ([[0, 0], [0, 50]], (-1, 3), (3, 1)),
    ([[0, 0], [50, 0]], (-3, 2), (0, 2)),
])
def test_projection_examples(cl, point, expected):
    assert project_to_centerline(Centerline(cl), point) == pytest.approx(expected, abs=1e-9)


def test_empty_centerline_rejected():
    with pytest.raises(GeometryError):
        station_lateral_to_cartesian(None, 1, 0)
    with pytest.raises(GeometryError):
        Centerline([[0, 0]])


def _smooth_centerline(rng):
    phis = np.cumsum(rng.uniform(-0.15, 0.15, 12))
    steps = np.column_stack([np.cos(phis), np.sin(phis)]) * 6.0
    return Centerline(np.vstack([[0, 0], np.cumsum(steps, axis=0)]))


def test_round_trip_on_random_centerlines():
    worst = 0.0
    for seed in range(1000):
        rng = np.random.default_rng([89, seed])
        cl = _smooth_centerline(rng)
        s = float(rng.uniform(2.0, cl.length - 2.0))
        lat = float(rng.uniform(-2.0, 2.0))
        x, y, _ = cl.to_cartesian(s, lat)
        s2, lat2 = cl.project((x, y))
        x2, y2, _ = cl.to_cartesian(s2, lat2)
        worst = max(worst, math.hypot(x2 - x, y2 - y))
    assert worst < 1e-6


@pytest.mark.parametrize("heading, corners", [
    (0.0, {(2.3, 0.95), (2.3, -0.95), (-2.3, 0.95), (-2.3, -0.95)}),
    (math.pi / 2, {(0.95, 2.3), (0.95, -2.3), (-0.95, 2.3), (-0.95, -2.3)}),
])
def test_ego_footprint_corners(heading, corners):
    got = {tuple(np.round(c, 9)) for c in ego_footprint(Pose2D(0, 0, heading))}
    assert got == {tuple(np.round(c, 9)) for c in corners}


def test_footprints_along_shape():
    assert footprints_along(straight_traj()).shape == (8, 4, 2)


def test_trajectory_validation():
    with pytest.raises(ValueError):
        Trajectory(np.zeros((8, 2)))
    with pytest.raises(ValueError):
        Trajectory(np.full((8, 3), np.nan))
    with pytest.raises(ValueError):
        Trajectory([[101, 0, 0]])
    t = Trajectory([[0, 0, 3 * math.pi]])
    assert t.heading[0] == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        t.poses[0, 0] = 1.0


def test_trajectory_equality_and_hash():
    a, b = straight_traj(), straight_traj()
    assert a == b and hash(a) == hash(b) and a.content_hash() == b.content_hash()
    assert a != straight_traj(y=1.0)


def test_l1_distance_wraps_heading():
    a = Trajectory([[0, 0, math.pi - 0.05]])
    b = Trajectory([[0, 0, -math.pi + 0.05]])
    assert trajectory_l1(a, b) == pytest.approx(0.1)
    assert pairwise_l1([a], [a, b]) == pytest.approx(np.array([[0.0, 0.1]]))
