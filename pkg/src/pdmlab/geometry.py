"""Planar geometry helpers: angle wrapping, polygons, vehicle footprints.

Polygons are ``(N, 2)`` float arrays of vertices in order (either orientation).
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Raised for degenerate or malformed geometric input."""


def wrap_angle(rad):
    """Wrap an angle (scalar or array) into ``(-pi, pi]``.

    >>> wrap_angle(3 * math.pi) == math.pi
    True
    """
    wrapped = math.pi - np.mod(math.pi - np.asarray(rad, dtype=float), TWO_PI)
    # mod() can return 2*pi - ulp for inputs a hair below a multiple of 2*pi
    wrapped = np.where(wrapped <= -math.pi + 1e-12, math.pi, wrapped)
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


def as_polygon(points, *, name: str = "polygon") -> np.ndarray:
    poly = np.asarray(points, dtype=float)
    if poly.ndim != 2 or poly.shape[1] != 2 or poly.shape[0] < 3:
        raise GeometryError(f"{name}: expected at least 3 (x, y) vertices, got shape {poly.shape}")
    if not np.all(np.isfinite(poly)):
        raise GeometryError(f"{name}: non-finite vertex")
    if abs(signed_area(poly)) <= 1e-12:
        raise GeometryError(f"{name}: degenerate polygon (zero area)")
    return poly


def signed_area(poly: np.ndarray) -> float:
    """Shoelace area; positive for counterclockwise vertex order."""
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_area(poly) -> float:
    return abs(signed_area(np.asarray(poly, dtype=float)))


def is_convex(poly: np.ndarray) -> bool:
    edges = np.roll(poly, -1, axis=0) - poly
    nxt = np.roll(edges, -1, axis=0)
    cross = edges[:, 0] * nxt[:, 1] - edges[:, 1] * nxt[:, 0]
    cross = cross[np.abs(cross) > 1e-12]
    return bool(np.all(cross > 0) or np.all(cross < 0))


def points_in_polygon(points, poly) -> np.ndarray:
    """Even-odd ray casting for an ``(M, 2)`` batch of points.

    Points exactly on an edge may fall either way.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    poly = np.asarray(poly, dtype=float)
    px = pts[:, 0:1]
    py = pts[:, 1:2]
    x0, y0 = poly[:, 0], poly[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    straddle = (y0 > py) != (y1 > py)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
    hits = straddle & (px < x_cross)
    return (np.count_nonzero(hits, axis=1) % 2) == 1


def point_in_polygon(point, poly) -> bool:
    return bool(points_in_polygon(np.asarray(point, dtype=float)[None, :], poly)[0])


def _project(poly: np.ndarray, axis: np.ndarray) -> tuple[float, float]:
    d = poly @ axis
    return float(d.min()), float(d.max())


def _sat_separated(a: np.ndarray, b: np.ndarray) -> bool:
    for poly in (a, b):
        edges = np.roll(poly, -1, axis=0) - poly
        normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
        pa = a @ normals.T
        pb = b @ normals.T
        if np.any((pa.max(axis=0) < pb.min(axis=0)) | (pb.max(axis=0) < pa.min(axis=0))):
            return True
    return False


def _segments_intersect(a: np.ndarray, b: np.ndarray) -> bool:
    """True if any edge of ``a`` crosses or touches any edge of ``b``."""
    p = a[:, None, :]
    r = (np.roll(a, -1, axis=0) - a)[:, None, :]
    q = b[None, :, :]
    s = (np.roll(b, -1, axis=0) - b)[None, :, :]

    def cross(u, v):
        return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]

    denom = cross(r, s)
    qp = q - p
    with np.errstate(divide="ignore", invalid="ignore"):
        t = cross(qp, s) / denom
        u = cross(qp, r) / denom
    proper = (np.abs(denom) > 1e-15) & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1)
    if np.any(proper):
        return True
    # collinear overlapping edges
    collinear = (np.abs(denom) <= 1e-15) & (np.abs(cross(qp, r)) <= 1e-12)
    if np.any(collinear):
        rr = np.einsum("...k,...k->...", r, r)
        t0 = np.einsum("...k,...k->...", qp, r) / np.where(rr == 0, 1, rr)
        t1 = t0 + np.einsum("...k,...k->...", s, r) / np.where(rr == 0, 1, rr)
        lo, hi = np.minimum(t0, t1), np.maximum(t0, t1)
        if np.any(collinear & (hi >= 0) & (lo <= 1)):
            return True
    return False


def polygons_intersect(a, b) -> bool:
    """Whether two simple polygons overlap (touching counts as overlap).

    Convex pairs use the separating-axis test; otherwise edge crossings plus
    containment of one polygon's vertex in the other decide.
    """
    a = as_polygon(a, name="polygon a")
    b = as_polygon(b, name="polygon b")
    # cheap bounding-box rejection
    if (a[:, 0].max() < b[:, 0].min() or b[:, 0].max() < a[:, 0].min()
            or a[:, 1].max() < b[:, 1].min() or b[:, 1].max() < a[:, 1].min()):
        return False
    if is_convex(a) and is_convex(b):
        return not _sat_separated(a, b)
    if _segments_intersect(a, b):
        return True
    return point_in_polygon(a[0], b) or point_in_polygon(b[0], a)


def _point_segment_distances(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    a = poly
    ab = np.roll(poly, -1, axis=0) - poly
    ap = points[:, None, :] - a[None, :, :]
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("mij,ij->mi", ap, ab) / denom, 0.0, 1.0)
    closest = a[None, :, :] + t[..., None] * ab[None, :, :]
    return np.linalg.norm(points[:, None, :] - closest, axis=2).min(axis=1)


def polygon_distance(a, b) -> float:
    """Minimum Euclidean distance between two polygons; 0 when they overlap."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if polygons_intersect(a, b):
        return 0.0
    return float(min(_point_segment_distances(a, b).min(), _point_segment_distances(b, a).min()))


def rectangle(cx: float, cy: float, heading: float, length: float, width: float) -> np.ndarray:
    """Counterclockwise corners of an oriented rectangle centred on ``(cx, cy)``."""
    hl, hw = 0.5 * length, 0.5 * width
    local = np.array([[-hl, -hw], [hl, -hw], [hl, hw], [-hl, hw]])
    c, s = math.cos(heading), math.sin(heading)
    rot = np.array([[c, -s], [s, c]])
    return local @ rot.T + np.array([cx, cy])


def convex_hull(points) -> np.ndarray:
    """Monotone-chain convex hull, counterclockwise, without repeated endpoint.

    Degenerate inputs return fewer than three vertices.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def hull_area(points) -> float:
    hull = convex_hull(points)
    if len(hull) < 3:
        return 0.0
    return polygon_area(hull)
