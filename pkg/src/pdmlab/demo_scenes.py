"""Synthetic scenes used by the demos, the CLI ``demo`` command and the tests.

Six scene types in two variants each. The ego starts at the origin heading
along +x, and the lane is bounded by a drivable corridor of half-width 4.6 m.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import rectangle
from .pseudo_expert import lateral_profile
from .scene import Centerline, ObstacleTrack, Pose2D, Scene, Trajectory

CORRIDOR_HALF_WIDTH = 4.6
SCENE_TYPES = ("straight", "curve", "lead_brake", "lateral_squeeze", "off_route_bait", "dead_end")


def straight_centerline(start: float = -10.0, end: float = 90.0) -> Centerline:
    return Centerline([[start, 0.0], [end, 0.0]])


def arc_centerline(radius: float, sign: float = 1.0, straight_lead: float = 10.0,
                   arc_length: float = 90.0, spacing: float = 5.0) -> Centerline:
    """Straight lead-in along +x, then a circular arc turning left (sign=+1) or right."""
    pts = [[-straight_lead, 0.0]]
    n = int(round(arc_length / spacing))
    for k in range(n + 1):
        phi = k * spacing / radius
        pts.append([radius * math.sin(phi), sign * radius * (1.0 - math.cos(phi))])
    return Centerline(pts)


def corridor(centerline: Centerline, half_width: float = CORRIDOR_HALF_WIDTH,
             start: float = 0.0, end: float | None = None, spacing: float = 2.5) -> np.ndarray:
    """Polygon bounding ``|lateral| <= half_width`` between two stations."""
    end = centerline.length if end is None else end
    s = np.linspace(start, end, max(2, int(math.ceil((end - start) / spacing)) + 1))
    left = centerline.to_cartesian(s, np.full_like(s, half_width))[:, :2]
    right = centerline.to_cartesian(s, np.full_like(s, -half_width))[:, :2]
    return np.vstack([right, left[::-1]])


def _human(centerline: Centerline, d0: float, speeds, lat_start: float = 0.0, lat_end: float = 0.0,
            portion: float = 1.0, dt: float = 0.5) -> Trajectory:
    speeds = np.asarray(speeds, dtype=float)
    stations = d0 + np.cumsum(speeds) * dt
    lateral = lateral_profile(len(speeds), lat_start, lat_end, portion)
    return Trajectory(centerline.to_cartesian(stations, lateral), dt)


def _track_along(centerline: Centerline, stations, lateral: float, dims=(4.6, 1.9)) -> tuple:
    poses = centerline.to_cartesian(np.asarray(stations, dtype=float), np.full(len(stations), lateral))
    return tuple(rectangle(x, y, h, *dims) for x, y, h in poses)


def make_scene(kind: str, variant: int = 0, T: int = 8, dt: float = 0.5) -> Scene:
    if kind not in SCENE_TYPES:
        raise ValueError(f"unknown scene type {kind!r}")
    speed = (6.0, 10.0)[variant % 2]
    sid = f"{kind}_{variant}"
    obstacles: list = []
    zone = None
    human_speeds = [speed] * T
    human_lat = (0.0, 0.0, 1.0)

    if kind == "curve":
        cl = arc_centerline(radius=80.0, sign=1.0 if variant == 0 else -1.0)
    else:
        cl = straight_centerline()
    d0 = 10.0  # ego sits at the origin, 10 m into the centerline
    drivable = [corridor(cl)]

    if kind == "lead_brake":
        gap = 18.0 if variant == 0 else 25.0
        lead_v = [max(0.0, speed - 3.0 * k * dt) for k in range(1, T + 1)]
        lead_s = d0 + gap + np.cumsum(lead_v) * dt
        obstacles.append(ObstacleTrack(_track_along(cl, lead_s, 0.0), is_static=False))
        human_speeds = [max(0.0, speed - 2.0 * k * dt) for k in range(1, T + 1)]
    elif kind == "lateral_squeeze":
        s_park = d0 + (15.0 if variant == 0 else 25.0)
        obstacles.append(ObstacleTrack(_track_along(cl, [s_park] * T, -2.6), is_static=True))
        human_lat = (0.0, 1.0, 0.6)
    elif kind == "off_route_bait":
        # a wide paved pocket on the left that is not part of the route
        pocket = np.array([[5.0, CORRIDOR_HALF_WIDTH - 0.2], [45.0, CORRIDOR_HALF_WIDTH - 0.2],
                           [45.0, 9.0], [5.0, 9.0]])
        drivable.append(pocket)
        if variant == 1:
            zone = np.array([[40.0, -CORRIDOR_HALF_WIDTH], [42.0, -CORRIDOR_HALF_WIDTH],
                             [42.0, CORRIDOR_HALF_WIDTH], [40.0, CORRIDOR_HALF_WIDTH]])
            human_speeds = [min(speed, 6.0)] * T
    elif kind == "dead_end":
        end = d0 + (22.0 if variant == 0 else 32.0)
        drivable = [corridor(cl, end=end + 3.0)]
        barrier = rectangle(end + 1.5, 0.0, 0.0, 1.0, 2 * CORRIDOR_HALF_WIDTH)
        obstacles.append(ObstacleTrack(tuple([barrier] * T), is_static=True))
        room = end - d0 - 4.0
        human_speeds = [float(v) for v in np.minimum(speed, np.linspace(room / 4.0, 0.0, T))]

    human = _human(cl, d0, human_speeds, *human_lat, dt=dt)
    ego = cl.to_cartesian(d0, 0.0)
    return Scene.build(sid, Pose2D(float(ego[0]), float(ego[1]), float(ego[2])), speed, cl, drivable,
                       obstacles, human, dt=dt, horizon_steps=T, traffic_light_zone=zone,
                       meta={"type": kind, "variant": variant})


def demo_scenes() -> list[Scene]:
    """The twelve demo scenes in a fixed order."""
    return [make_scene(kind, v) for kind in SCENE_TYPES for v in (0, 1)]
