"""Planar geometry for field polygons.

Polygons are (lat, lng) vertex lists. Metric operations (grid sampling,
boundary distance, area) run in a local equirectangular projection about
the polygon centroid; fields are small enough that the projection error
is negligible.
"""

from __future__ import annotations

import math

import numpy as np

METERS_PER_DEGREE = 111320.0

# Spatial shard key: equal-angle tiles of 0.15 degrees, roughly the area of
# the ~300 km^2 sharding cells the dataset splits call for at Indian latitudes.
CELL_SIZE_DEG = 0.15


def cell_id(lat: float, lng: float, cell_size: float = CELL_SIZE_DEG) -> str:
    """Spatial shard key for a coordinate: the enclosing equal-angle tile."""
    return f"{math.floor(lat / cell_size)}_{math.floor(lng / cell_size)}"


def polygon_centroid(polygon: list[tuple[float, float]]) -> tuple[float, float]:
    lats = [p[0] for p in polygon]
    lngs = [p[1] for p in polygon]
    return sum(lats) / len(lats), sum(lngs) / len(lngs)


def to_local_meters(
    polygon: list[tuple[float, float]], origin: tuple[float, float]
) -> np.ndarray:
    """Project (lat, lng) vertices to (x, y) meters about an origin."""
    lat0, lng0 = origin
    coslat = math.cos(math.radians(lat0))
    pts = np.asarray(polygon, dtype=np.float64)
    x = (pts[:, 1] - lng0) * METERS_PER_DEGREE * coslat
    y = (pts[:, 0] - lat0) * METERS_PER_DEGREE
    return np.stack([x, y], axis=1)


def from_local_meters(
    xy: np.ndarray, origin: tuple[float, float]
) -> list[tuple[float, float]]:
    lat0, lng0 = origin
    coslat = math.cos(math.radians(lat0))
    lat = lat0 + xy[:, 1] / METERS_PER_DEGREE
    lng = lng0 + xy[:, 0] / (METERS_PER_DEGREE * coslat)
    return [(float(a), float(b)) for a, b in zip(lat, lng)]


def point_in_polygon(x: float, y: float, poly: np.ndarray) -> bool:
    """Even-odd ray casting; points on the boundary count as inside."""
    n = len(poly)
    inside = False
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        # on-segment check keeps shared edges deterministic
        if _on_segment(x, y, xi, yi, xj, yj):
            return True
        if (yi > y) != (yj > y):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def _on_segment(x, y, x1, y1, x2, y2, eps: float = 1e-9) -> bool:
    cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
    if abs(cross) > eps * max(1.0, abs(x2 - x1) + abs(y2 - y1)):
        return False
    dot = (x - x1) * (x - x2) + (y - y1) * (y - y2)
    return dot <= eps


def points_in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Vectorized even-odd test for an (N, 2) point array (boundary inside)."""
    x = points[:, 0]
    y = points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    n = len(poly)
    j = n - 1
    for i in range(n):
        xi, yi = poly[i]
        xj, yj = poly[j]
        crosses = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = (xj - xi) * (y - yi) / (yj - yi + (yj == yi)) + xi
        inside ^= crosses & (x < x_cross)
        j = i
    # boundary points: distance to the outline is ~0
    on_edge = distance_to_boundary(points, poly) <= 1e-9
    return inside | on_edge


def distance_to_boundary(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Exact point-to-outline distance for an (N, 2) point array, meters."""
    n = len(poly)
    best = np.full(len(points), np.inf)
    for i in range(n):
        a = poly[i]
        b = poly[(i + 1) % n]
        ab = b - a
        denom = float(ab @ ab)
        if denom == 0.0:
            d = np.hypot(points[:, 0] - a[0], points[:, 1] - a[1])
        else:
            t = np.clip(((points - a) @ ab) / denom, 0.0, 1.0)
            proj = a + t[:, None] * ab
            d = np.hypot(points[:, 0] - proj[:, 0], points[:, 1] - proj[:, 1])
        best = np.minimum(best, d)
    return best


def polygon_area_m2(poly: np.ndarray) -> float:
    """Shoelace area of a simple polygon in local meters."""
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def polygon_is_simple(poly: np.ndarray) -> bool:
    """True when no two non-adjacent edges intersect."""
    n = len(poly)
    if n < 3:
        return False
    segs = [(poly[i], poly[(i + 1) % n]) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_intersect(*segs[i], *segs[j]):
                return False
    return True


def _segments_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    o1, o2 = orient(p1, p2, p3), orient(p1, p2, p4)
    o3, o4 = orient(p3, p4, p1), orient(p3, p4, p2)
    return o1 != o2 and o3 != o4
