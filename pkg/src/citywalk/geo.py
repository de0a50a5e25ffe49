"""Great-circle and locally planar geometry shared by clustering, routing, and metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EARTH_RADIUS_M = 6_371_000.0

# meters per degree of latitude on the reference sphere
_M_PER_DEG = math.pi * EARTH_RADIUS_M / 180.0


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class GeoPoint:
    """A WGS-style (longitude, latitude) pair in degrees."""

    longitude: float
    latitude: float

    def __post_init__(self) -> None:
        lon, lat = self.longitude, self.latitude
        if not (math.isfinite(lon) and math.isfinite(lat)):
            raise GeometryError(f"non-finite coordinates ({lon}, {lat})")
        if not -180.0 <= lon <= 180.0:
            raise GeometryError(f"longitude {lon} outside [-180, 180]")
        if not -90.0 <= lat <= 90.0:
            raise GeometryError(f"latitude {lat} outside [-90, 90]")


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius 6,371,000 m.

    Symmetric, and zero exactly when both coordinate pairs are identical.
    """
    lon1, lat1 = math.radians(a.longitude), math.radians(a.latitude)
    lon2, lat2 = math.radians(b.longitude), math.radians(b.latitude)
    h = (
        math.sin((lat2 - lat1) / 2.0) ** 2
        + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2.0) ** 2
    )
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric, zero-diagonal matrix of non-negative distances in meters."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise GeometryError("distance matrix must be square")
        if not np.isfinite(e).all():
            raise GeometryError("distance matrix has non-finite entries")
        if (e < 0).any():
            raise GeometryError("distance matrix has negative entries")
        if np.diagonal(e).any():
            raise GeometryError("distance matrix diagonal must be zero")
        if not np.array_equal(e, e.T):
            raise GeometryError("distance matrix must be symmetric")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __getitem__(self, ij: tuple[int, int]) -> float:
        return float(self.entries[ij])


def build_distance_matrix(points: list[GeoPoint]) -> DistanceMatrix:
    """Pairwise haversine distances; raises on an empty point set."""
    if not points:
        raise GeometryError("empty point set")
    n = len(points)
    e = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d = haversine_distance(points[i], points[j])
            e[i, j] = d
            e[j, i] = d
    return DistanceMatrix(e)


def _orientation(ax: float, ay: float, bx: float, by: float, cx: float, cy: float) -> int:
    cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if cross > 0.0:
        return 1
    if cross < 0.0:
        return -1
    return 0


def _on_segment(ax: float, ay: float, bx: float, by: float, px: float, py: float) -> bool:
    # assumes p collinear with segment (a, b)
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def _segments_intersect(p1, p2, p3, p4) -> bool:
    """Whether the closed segments p1-p2 and p3-p4 share at least one point."""
    d1 = _orientation(*p3, *p4, *p1)
    d2 = _orientation(*p3, *p4, *p2)
    d3 = _orientation(*p1, *p2, *p3)
    d4 = _orientation(*p1, *p2, *p4)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0 and _on_segment(*p3, *p4, *p1):
        return True
    if d2 == 0 and _on_segment(*p3, *p4, *p2):
        return True
    if d3 == 0 and _on_segment(*p1, *p2, *p3):
        return True
    if d4 == 0 and _on_segment(*p1, *p2, *p4):
        return True
    return False


def _project_equirectangular(path: list[GeoPoint]) -> list[tuple[float, float]]:
    lat0 = math.radians(sum(p.latitude for p in path) / len(path))
    k = math.cos(lat0)
    return [(p.longitude * k * _M_PER_DEG, p.latitude * _M_PER_DEG) for p in path]


def count_self_intersections(path: list[GeoPoint]) -> int:
    """Number of non-adjacent segment pairs of the polyline that intersect.

    The path is projected onto a local equirectangular plane centered on its
    centroid latitude, then every unordered pair of non-adjacent segments is
    tested with sign-of-orientation predicates. Segments that merely share a
    path vertex as consecutive segments never count; any contact between
    non-adjacent segments (proper crossing, endpoint touch from a revisited
    point, or collinear overlap) counts once per pair. Consecutive duplicate
    points are collapsed first so they neither crash the test nor fabricate
    phantom adjacencies.
    """
    if len(path) < 2:
        raise GeometryError("degenerate path")
    pts: list[GeoPoint] = [path[0]]
    for p in path[1:]:
        if (p.longitude, p.latitude) != (pts[-1].longitude, pts[-1].latitude):
            pts.append(p)
    if len(pts) < 2:
        return 0
    proj = _project_equirectangular(pts)
    segments = list(zip(proj, proj[1:]))
    count = 0
    for i in range(len(segments)):
        for j in range(i + 2, len(segments)):
            if _segments_intersect(*segments[i], *segments[j]):
                count += 1
    return count
