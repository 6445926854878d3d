"""Scene model: poses, trajectories, route centerline and scene geometry.

Trajectories are expressed in the ego frame. A centerline maps a
(station, lateral) pair to a Cartesian pose; positive lateral is left of the
driving direction.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .geometry import GeometryError, as_polygon, points_in_polygon, rectangle, wrap_angle

DEFAULT_DT = 0.5
DEFAULT_HORIZON = 8
DEFAULT_XY_LIMIT = 100.0
DEFAULT_VEHICLE_DIMS = (4.6, 1.9)


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "heading", wrap_angle(self.heading))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.heading)


class Trajectory:
    """A fixed-horizon sequence of future ego poses ``(x, y, heading)``.

    The pose array is stored read-only; headings are wrapped on construction.
    """

    frame = "ego"

    def __init__(self, poses, dt: float = DEFAULT_DT, xy_limit: float = DEFAULT_XY_LIMIT):
        arr = np.array(poses, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 3 or arr.shape[0] < 1:
            raise ValueError(f"trajectory poses must have shape (T, 3), got {arr.shape}")
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("trajectory contains non-finite values")
        if np.any(np.abs(arr[:, :2]) > xy_limit):
            raise ValueError(f"trajectory exceeds the |x|,|y| <= {xy_limit} limit")
        arr[:, 2] = wrap_angle(arr[:, 2])
        arr.setflags(write=False)
        self._poses = arr
        self.dt = float(dt)

    @property
    def poses(self) -> np.ndarray:
        return self._poses

    @property
    def xy(self) -> np.ndarray:
        return self._poses[:, :2]

    @property
    def heading(self) -> np.ndarray:
        return self._poses[:, 2]

    def __len__(self) -> int:
        return self._poses.shape[0]

    def pose(self, i: int) -> Pose2D:
        return Pose2D(*self._poses[i])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return self.dt == other.dt and np.array_equal(self._poses, other._poses)

    def __hash__(self) -> int:
        return hash((self.dt, self._poses.tobytes()))

    def __repr__(self) -> str:
        return f"Trajectory(T={len(self)}, dt={self.dt}, end=({self._poses[-1, 0]:.2f}, {self._poses[-1, 1]:.2f}))"

    def content_hash(self) -> str:
        """Stable hash of the pose content (rounded to 1e-9 m)."""
        rounded = np.round(self._poses, 9) + 0.0  # +0.0 folds -0.0 into 0.0
        h = hashlib.sha256()
        h.update(np.float64(self.dt).tobytes())
        h.update(np.ascontiguousarray(rounded, dtype="<f8").tobytes())
        return h.hexdigest()[:16]

    def to_list(self) -> list[list[float]]:
        return [[float(v) for v in row] for row in self._poses]


class Centerline:
    """Piecewise-linear route polyline with a blended heading profile.

    Heading is constant along each segment and blends linearly across a
    ``blend_window`` (metres) centred on every interior vertex. Stations past
    the end extrapolate along the final segment; negative stations clamp to 0.
    """

    def __init__(self, vertices, blend_window: float = 0.5):
        v = np.array(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 2:
            raise GeometryError("centerline needs at least 2 (x, y) vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("centerline has non-finite vertices")
        seg = np.diff(v, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        if np.any(seg_len <= 1e-9):
            raise GeometryError("centerline has repeated consecutive vertices")
        v.setflags(write=False)
        self.vertices = v
        self.seg_len = seg_len
        self.stations = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.length = float(self.stations[-1])
        self.seg_heading = np.arctan2(seg[:, 1], seg[:, 0])
        unwrapped = [self.seg_heading[0]]
        for h in self.seg_heading[1:]:
            unwrapped.append(unwrapped[-1] + wrap_angle(h - unwrapped[-1]))
        self._seg_heading_unwrapped = np.array(unwrapped)
        self.blend_window = float(blend_window)

        knots_s = [0.0]
        knots_h = [unwrapped[0]]
        half = np.zeros(len(v))
        for i in range(1, len(v) - 1):
            w = min(0.5 * blend_window, 0.5 * seg_len[i - 1], 0.5 * seg_len[i])
            half[i] = w
            knots_s += [self.stations[i] - w, self.stations[i] + w]
            knots_h += [unwrapped[i - 1], unwrapped[i]]
        knots_s.append(self.length)
        knots_h.append(unwrapped[-1])
        self._knots_s = np.array(knots_s)
        self._knots_h = np.array(knots_h)
        self._half = half
        self._build_pieces()

    # -- forward mapping -------------------------------------------------
    def heading_at(self, station):
        s = np.maximum(np.asarray(station, dtype=float), 0.0)
        return wrap_angle(np.interp(s, self._knots_s, self._knots_h))

    def position_at(self, station) -> np.ndarray:
        s = np.maximum(np.asarray(station, dtype=float), 0.0)
        x = np.interp(s, self.stations, self.vertices[:, 0])
        y = np.interp(s, self.stations, self.vertices[:, 1])
        beyond = np.maximum(s - self.length, 0.0)
        h_end = self.seg_heading[-1]
        x = x + beyond * math.cos(h_end)
        y = y + beyond * math.sin(h_end)
        return np.stack([x, y], axis=-1)

    def to_cartesian(self, station, lateral) -> np.ndarray:
        """Vectorised mapping; returns ``(..., 3)`` poses."""
        station = np.asarray(station, dtype=float)
        lateral = np.asarray(lateral, dtype=float)
        pos = self.position_at(station)
        h = np.asarray(self.heading_at(station))
        x = pos[..., 0] - lateral * np.sin(h)
        y = pos[..., 1] + lateral * np.cos(h)
        return np.stack(np.broadcast_arrays(x, y, h), axis=-1)

    # -- inverse mapping -------------------------------------------------
    def _build_pieces(self):
        breaks = np.unique(np.concatenate([self._knots_s, self.stations]))
        const, ramps = [], []
        for a, b in zip(breaks[:-1], breaks[1:]):
            if b - a <= 1e-12:
                continue
            ha = float(np.interp(a, self._knots_s, self._knots_h))
            hb = float(np.interp(b, self._knots_s, self._knots_h))
            if abs(hb - ha) <= 1e-12:
                const.append((a, b, ha))
            else:
                ramps.append((a, b))
        c = np.array(const) if const else np.zeros((0, 3))
        self._const_a = c[:, 0]
        self._const_b = c[:, 1]
        self._const_t = np.stack([np.cos(c[:, 2]), np.sin(c[:, 2])], axis=1)
        self._const_p = self.position_at(c[:, 0]) if len(c) else np.zeros((0, 2))
        # ramp pieces: position and (unwrapped) heading are both linear in s
        self._ramps = []
        for a, b in ramps:
            ca = self.position_at(a)
            cb = self.position_at(b)
            ha = float(np.interp(a, self._knots_s, self._knots_h))
            hb = float(np.interp(b, self._knots_s, self._knots_h))
            span = b - a
            self._ramps.append((a, b, float(ca[0]), float(ca[1]), float((cb[0] - ca[0]) / span),
                                float((cb[1] - ca[1]) / span), ha, (hb - ha) / span))

    @staticmethod
    def _ramp_eval(s: float, ramp, px: float, py: float) -> tuple[float, float]:
        a, _, cx, cy, vx, vy, ha, k = ramp
        h = ha + k * (s - a)
        dx = px - (cx + vx * (s - a))
        dy = py - (cy + vy * (s - a))
        ch, sh = math.cos(h), math.sin(h)
        return dx * ch + dy * sh, -dx * sh + dy * ch

    def project(self, point) -> tuple[float, float]:
        """Invert :meth:`to_cartesian` for one point, choosing the nearest foot."""
        p = np.asarray(point, dtype=float)
        best_s, best_l, best_d = None, None, math.inf

        # constant-heading pieces (including the extrapolated tail)
        rel = p[None, :] - self._const_p
        along = np.einsum("ij,ij->i", rel, self._const_t)
        roots = self._const_a + along
        tol = 1e-9
        ok = (roots >= self._const_a - tol) & (roots <= self._const_b + tol)
        lat = -rel[:, 0] * self._const_t[:, 1] + rel[:, 1] * self._const_t[:, 0]
        if np.any(ok):
            i = int(np.argmin(np.where(ok, np.abs(lat), np.inf)))
            best_s, best_l, best_d = float(roots[i]), float(lat[i]), abs(float(lat[i]))
        h_end = self.seg_heading[-1]
        t_end = np.array([math.cos(h_end), math.sin(h_end)])
        rel_end = p - self.vertices[-1]
        tail = float(rel_end @ t_end)
        if tail > 0:
            l_end = float(-rel_end[0] * t_end[1] + rel_end[1] * t_end[0])
            if abs(l_end) < best_d:
                best_s, best_l, best_d = self.length + tail, l_end, abs(l_end)

        # heading-blend ramps near interior vertices
        px, py = float(p[0]), float(p[1])
        for ramp in self._ramps:
            a, b, cx, cy = ramp[:4]
            if math.hypot(px - cx, py - cy) > best_d + (b - a) + 1e-9:
                continue
            grid = (a, 0.5 * (a + b), b)
            vals = [self._ramp_eval(s, ramp, px, py)[0] for s in grid]
            for s0, s1, f0, f1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
                if f0 == 0.0:
                    root = s0
                elif f0 * f1 < 0:
                    root = brentq(lambda s: self._ramp_eval(s, ramp, px, py)[0], s0, s1, xtol=1e-14)
                elif f1 == 0.0:
                    root = s1
                else:
                    continue
                lat_r = self._ramp_eval(root, ramp, px, py)[1]
                if abs(lat_r) < best_d:
                    best_s, best_l, best_d = float(root), lat_r, abs(lat_r)

        # clamp before the start: signed perpendicular distance to the first segment
        t0 = np.array([math.cos(self.seg_heading[0]), math.sin(self.seg_heading[0])])
        rel0 = p - self.vertices[0]
        if float(rel0 @ t0) < 0:
            d0 = float(np.hypot(*rel0))
            if d0 < best_d or best_s is None:
                best_s = 0.0
                best_l = float(-rel0[0] * t0[1] + rel0[1] * t0[0])
                best_d = d0
        if best_s is None:  # pragma: no cover - every point has a foot on some piece
            raise GeometryError("projection failed")
        return best_s, best_l

    def project_many(self, points) -> tuple[np.ndarray, np.ndarray]:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.array([self.project(p) for p in pts]).reshape(-1, 2)
        return out[:, 0], out[:, 1]


def station_lateral_to_cartesian(centerline: Centerline, station: float, lateral: float) -> Pose2D:
    if centerline is None:
        raise GeometryError("empty centerline")
    station = max(float(station), 0.0)
    x, y, h = centerline.to_cartesian(station, lateral)
    return Pose2D(x, y, h)


def project_to_centerline(centerline: Centerline, point) -> tuple[float, float]:
    if centerline is None:
        raise GeometryError("empty centerline")
    return centerline.project(point)


def ego_footprint(pose: Pose2D, dims: Sequence[float] = DEFAULT_VEHICLE_DIMS) -> np.ndarray:
    length, width = dims
    if not (length > 0 and width > 0):
        raise GeometryError(f"vehicle dims must be positive, got {dims}")
    return rectangle(pose.x, pose.y, pose.heading, length, width)


def footprints_along(trajectory: Trajectory, dims: Sequence[float] = DEFAULT_VEHICLE_DIMS) -> np.ndarray:
    """Footprint corners for every pose, shape ``(T, 4, 2)``."""
    length, width = dims
    if not (length > 0 and width > 0):
        raise GeometryError(f"vehicle dims must be positive, got {dims}")
    hl, hw = 0.5 * length, 0.5 * width
    local = np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
    c = np.cos(trajectory.heading)[:, None]
    s = np.sin(trajectory.heading)[:, None]
    x = trajectory.xy[:, 0:1] + c * local[:, 0] - s * local[:, 1]
    y = trajectory.xy[:, 1:2] + s * local[:, 0] + c * local[:, 1]
    return np.stack([x, y], axis=-1)


@dataclass(frozen=True)
class ObstacleTrack:
    footprints: tuple
    is_static: bool = False

    def __post_init__(self):
        polys = tuple(as_polygon(fp, name="obstacle footprint") for fp in self.footprints)
        for p in polys:
            p.setflags(write=False)
        object.__setattr__(self, "footprints", polys)


@dataclass(frozen=True)
class EgoState:
    pose: Pose2D
    speed: float
    station: float
    lateral: float


@dataclass(frozen=True, eq=False)
class Scene:
    id: str
    ego: EgoState
    centerline: Centerline
    drivable: tuple
    obstacles: tuple
    human_trajectory: Trajectory
    dt: float = DEFAULT_DT
    horizon_steps: int = DEFAULT_HORIZON
    traffic_light_zone: Optional[np.ndarray] = None
    human_subscores: Any = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.human_trajectory) != self.horizon_steps or self.human_trajectory.dt != self.dt:
            raise ValueError(f"scene {self.id}: human_trajectory must have T={self.horizon_steps}, dt={self.dt}")
        for ob in self.obstacles:
            if len(ob.footprints) != self.horizon_steps:
                raise ValueError(f"scene {self.id}: obstacle track needs {self.horizon_steps} footprints")
        if not (-1e-9 <= self.ego.station <= self.centerline.length + 1e-9):
            raise ValueError(f"scene {self.id}: ego does not project inside the centerline")

    @classmethod
    def build(cls, id: str, ego_pose: Pose2D, ego_speed: float, centerline: Centerline,
              drivable, obstacles, human_trajectory: Trajectory, dt: float = DEFAULT_DT,
              horizon_steps: int = DEFAULT_HORIZON, traffic_light_zone=None,
              human_subscores=None, meta: Optional[dict] = None) -> "Scene":
        """Construct a scene, deriving the ego station/lateral by projection."""
        d0, lat0 = centerline.project((ego_pose.x, ego_pose.y))
        ego = EgoState(ego_pose, float(ego_speed), d0, lat0)
        zone = None if traffic_light_zone is None else as_polygon(traffic_light_zone, name="traffic_light_zone")
        return cls(
            id=id, ego=ego, centerline=centerline,
            drivable=tuple(as_polygon(p, name="drivable") for p in drivable),
            obstacles=tuple(obstacles), human_trajectory=human_trajectory, dt=dt,
            horizon_steps=horizon_steps, traffic_light_zone=zone,
            human_subscores=human_subscores, meta=dict(meta or {}),
        )


def points_in_drivable(scene: Scene, points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    inside = np.zeros(len(pts), dtype=bool)
    for poly in scene.drivable:
        inside |= points_in_polygon(pts, poly)
    return inside


def point_in_drivable(scene: Scene, point) -> bool:
    return bool(points_in_drivable(scene, np.asarray(point, dtype=float)[None, :])[0])


def trajectory_l1(a: Trajectory, b: Trajectory, heading_weight: float = 1.0) -> float:
    """Sum over steps of ``|dx| + |dy| + w * |wrapped dheading|``."""
    if len(a) != len(b):
        raise ValueError("trajectories differ in length")
    d = np.abs(a.xy - b.xy).sum() + heading_weight * np.abs(wrap_angle(a.heading - b.heading)).sum()
    return float(d)


def pairwise_l1(first, second, heading_weight: float = 1.0) -> np.ndarray:
    """Matrix of :func:`trajectory_l1` between two trajectory collections."""
    A = np.stack([t.poses for t in first]) if len(first) else np.zeros((0, 1, 3))
    B = np.stack([t.poses for t in second]) if len(second) else np.zeros((0, 1, 3))
    diff = A[:, None] - B[None, :]
    xy = np.abs(diff[..., :2]).sum(axis=(2, 3))
    head = np.abs(wrap_angle(diff[..., 2])).sum(axis=2)
    return xy + heading_weight * head
