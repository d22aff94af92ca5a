"""Geographic primitives and a spatial index.

Distances are great-circle (haversine) on a sphere of the IUGG mean radius.
Polygon containment is planar in the lon/lat plane, which is accurate enough
for city-scale districts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyLayer

EARTH_RADIUS_M = 6_371_008.8
METERS_PER_MILE = 1_609.344
QUARTER_MILE_M = METERS_PER_MILE / 4  # 402.336

# Slack used when turning a metric bound into a chord-space candidate query.
# Candidates are always re-checked with the exact scalar distance.
_CHORD_REL_SLACK = 1e-9
_CHORD_ABS_SLACK = 1e-12


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise ValueError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= lat <= 90.0:
            raise ValueError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise ValueError(f"longitude {lon} outside [-180, 180]")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters between two points."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    s_lat = math.sin((phi2 - phi1) / 2.0)
    s_lon = math.sin(math.radians(b.lon - a.lon) / 2.0)
    h = s_lat * s_lat + math.cos(phi1) * math.cos(phi2) * s_lon * s_lon
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def haversine_many(lat, lon, lats, lons) -> np.ndarray:
    """Vectorised haversine from one point to many (meters).

    Agrees with :func:`haversine_distance` to a few ulps; exact decisions
    in :class:`PointIndex` fall back to the scalar version near boundaries.
    """
    phi1 = np.radians(lat)
    phi2 = np.radians(np.asarray(lats, dtype=float))
    s_lat = np.sin((phi2 - phi1) / 2.0)
    s_lon = np.sin(np.radians(np.asarray(lons, dtype=float) - lon) / 2.0)
    h = s_lat * s_lat + np.cos(phi1) * np.cos(phi2) * s_lon * s_lon
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def _unit_xyz(lats, lons) -> np.ndarray:
    phi = np.radians(np.asarray(lats, dtype=float))
    lam = np.radians(np.asarray(lons, dtype=float))
    cos_phi = np.cos(phi)
    return np.column_stack([cos_phi * np.cos(lam), cos_phi * np.sin(lam), np.sin(phi)])


def _chord_for(meters: float) -> float:
    theta = meters / EARTH_RADIUS_M
    if theta >= math.pi:
        return 2.0 + 1.0
    return 2.0 * math.sin(theta / 2.0)


class PointIndex:
    """Immutable index over identified points.

    Backed by a k-d tree over unit-sphere coordinates, where chord length is
    monotone in great-circle distance. The tree only proposes candidates;
    every answer is settled with :func:`haversine_distance`, so results are
    identical to an exhaustive scan.
    """

    def __init__(self, points: Iterable[tuple[Hashable, GeoPoint]] = ()):
        pts = list(points)
        self.ids = [pid for pid, _ in pts]
        self.lats = np.array([p.lat for _, p in pts], dtype=float)
        self.lons = np.array([p.lon for _, p in pts], dtype=float)
        self._pos = {pid: i for i, pid in enumerate(self.ids)}
        self._tree = cKDTree(_unit_xyz(self.lats, self.lons)) if pts else None

    def __len__(self):
        return len(self.ids)

    def point(self, i: int) -> GeoPoint:
        return GeoPoint(self.lats[i], self.lons[i])

    def _exact(self, q: GeoPoint, idx) -> list[float]:
        return [haversine_distance(q, GeoPoint(self.lats[i], self.lons[i])) for i in idx]

    def nearest_distance(self, q: GeoPoint) -> float:
        if self._tree is None:
            raise EmptyLayer("nearest_distance on an empty index")
        qxyz = _unit_xyz([q.lat], [q.lon])[0]
        chord, _ = self._tree.query(qxyz, k=1)
        # every point whose chord is within slack of the best is a candidate
        reach = chord * (1.0 + _CHORD_REL_SLACK) + _CHORD_ABS_SLACK
        cand = self._tree.query_ball_point(qxyz, reach)
        return min(self._exact(q, cand))

    def _ball(self, q: GeoPoint, r: float) -> np.ndarray:
        """Positions of points within ``r`` meters of ``q`` (boundary inclusive)."""
        if self._tree is None:
            return np.empty(0, dtype=int)
        qxyz = _unit_xyz([q.lat], [q.lon])[0]
        reach = _chord_for(r) * (1.0 + _CHORD_REL_SLACK) + _CHORD_ABS_SLACK
        cand = np.sort(np.asarray(self._tree.query_ball_point(qxyz, reach), dtype=int))
        if cand.size == 0:
            return cand
        approx = haversine_many(q.lat, q.lon, self.lats[cand], self.lons[cand])
        # settle clear cases with the vectorised kernel, borderline ones exactly
        band = 1e-9 * max(r, 1.0)
        keep = approx < r - band
        unsure = np.flatnonzero(np.abs(approx - r) <= band)
        for k, d in zip(unsure, self._exact(q, cand[unsure])):
            keep[k] = d <= r
        return cand[keep]

    def count_within_radius(self, q: GeoPoint, r: float, exclude_id=None) -> int:
        if r <= 0:
            raise ValueError("radius must be positive")
        hits = self._ball(q, r)
        if exclude_id is not None and exclude_id in self._pos:
            return int(np.count_nonzero(hits != self._pos[exclude_id]))
        return int(hits.size)

    def within_radius(self, q: GeoPoint, r: float) -> np.ndarray:
        """Sorted positions (into ``ids``) of every point within ``r`` meters."""
        if r <= 0:
            raise ValueError("radius must be positive")
        return self._ball(q, r)


def nearest_distance(index: PointIndex, q: GeoPoint) -> float:
    return index.nearest_distance(q)


def count_within_radius(index: PointIndex, q: GeoPoint, r: float, exclude_id=None) -> int:
    return index.count_within_radius(q, r, exclude_id)


Ring = Sequence[GeoPoint]


@dataclass(frozen=True)
class GeoPolygon:
    exterior: tuple[GeoPoint, ...]
    holes: tuple[tuple[GeoPoint, ...], ...] = field(default_factory=tuple)

    def __post_init__(self):
        ext = _open_ring(self.exterior)
        if len(set(ext)) < 3:
            raise ValueError("polygon exterior needs at least 3 distinct vertices")
        object.__setattr__(self, "exterior", ext)
        object.__setattr__(self, "holes", tuple(_open_ring(h) for h in self.holes))

    @property
    def rings(self) -> tuple[tuple[GeoPoint, ...], ...]:
        return (self.exterior, *self.holes)

    def bbox(self) -> tuple[float, float, float, float]:
        lons = [p.lon for p in self.exterior]
        lats = [p.lat for p in self.exterior]
        return min(lons), min(lats), max(lons), max(lats)


def _open_ring(ring: Ring) -> tuple[GeoPoint, ...]:
    pts = tuple(ring)
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    return pts


def _on_ring_boundary(ring: tuple[GeoPoint, ...], x: float, y: float) -> bool:
    n = len(ring)
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        ax, ay, bx, by = a.lon, a.lat, b.lon, b.lat
        if not (min(ax, bx) <= x <= max(ax, bx) and min(ay, by) <= y <= max(ay, by)):
            continue
        cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
        scale = max(abs(bx - ax), abs(by - ay), 1e-300)
        if abs(cross) <= 1e-12 * scale:
            return True
    return False


def _crosses_odd(ring: tuple[GeoPoint, ...], x: float, y: float) -> bool:
    inside = False
    n = len(ring)
    j = n - 1
    for i in range(n):
        xi, yi = ring[i].lon, ring[i].lat
        xj, yj = ring[j].lon, ring[j].lat
        if (yi > y) != (yj > y):
            x_cross = xi + (y - yi) * (xj - xi) / (yj - yi)
            if x < x_cross:
                inside = not inside
        j = i
    return inside


def point_in_polygon(poly: GeoPolygon, q: GeoPoint) -> bool:
    """Ray-casting test in the lon/lat plane; boundaries count as inside."""
    x, y = q.lon, q.lat
    x0, y0, x1, y1 = poly.bbox()
    if not (x0 <= x <= x1 and y0 <= y <= y1):
        return False
    if any(_on_ring_boundary(ring, x, y) for ring in poly.rings):
        return True
    if not _crosses_odd(poly.exterior, x, y):
        return False
    return not any(_crosses_odd(h, x, y) for h in poly.holes)
