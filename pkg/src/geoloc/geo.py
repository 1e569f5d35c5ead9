"""Spherical geometry: great-circle distance and the geodesic median."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_MILES = 3958.7613

WEISZFELD_TOL = 1e-6  # radians between successive iterates
WEISZFELD_MAX_ITER = 500
COINCIDENCE_EPS = 1e-9  # radians


def _normalize_lon(lon: float) -> float:
    lon = math.fmod(lon, 360.0)
    if lon <= -180.0:
        lon += 360.0
    elif lon > 180.0:
        lon -= 360.0
    return lon


@dataclass(frozen=True, order=True)
class GeoPoint:
    """A (lat, lon) pair in degrees. Longitude is normalized to (-180, 180]."""

    lat: float
    lon: float

    def __post_init__(self):
        lat = float(self.lat)
        if not (-90.0 <= lat <= 90.0) or math.isnan(lat):
            raise ValueError(f"latitude out of range: {self.lat}")
        lon = float(self.lon)
        if not math.isfinite(lon):
            raise ValueError(f"longitude not finite: {self.lon}")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", _normalize_lon(lon))

    def to_tuple(self) -> tuple[float, float]:
        return (self.lat, self.lon)


def haversine_miles(a: GeoPoint, b: GeoPoint) -> float:
    lat1, lon1, lat2, lon2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    h = math.sin(dlat / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2) ** 2
    return 2 * EARTH_RADIUS_MILES * math.asin(min(1.0, math.sqrt(h)))


def haversine_array(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Vectorized haversine over broadcastable degree arrays, in miles."""
    lat1, lon1, lat2, lon2 = (np.radians(np.asarray(x, dtype=float)) for x in (lat1, lon1, lat2, lon2))
    h = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * EARTH_RADIUS_MILES * np.arcsin(np.minimum(1.0, np.sqrt(h)))


def to_unit_vectors(lat, lon) -> np.ndarray:
    lat = np.radians(np.asarray(lat, dtype=float))
    lon = np.radians(np.asarray(lon, dtype=float))
    return np.stack([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)], axis=-1)


def from_unit_vector(v: np.ndarray) -> GeoPoint:
    x, y, z = v / np.linalg.norm(v)
    lat = math.degrees(math.asin(max(-1.0, min(1.0, z))))
    lon = math.degrees(math.atan2(y, x))
    return GeoPoint(lat, lon)


def summed_distance(p: GeoPoint, points: Sequence[GeoPoint]) -> float:
    """Sum of great-circle distances (miles) from p to every point."""
    lats = np.array([q.lat for q in points])
    lons = np.array([q.lon for q in points])
    return float(haversine_array(p.lat, p.lon, lats, lons).sum())


def great_circle_midpoint(a: GeoPoint, b: GeoPoint) -> GeoPoint:
    va, vb = to_unit_vectors([a.lat, b.lat], [a.lon, b.lon])
    mid = va + vb
    if np.linalg.norm(mid) < 1e-12:
        raise ValueError("antipodal points have no unique midpoint")
    return from_unit_vector(mid)


def _arc(x: np.ndarray, pts: np.ndarray) -> np.ndarray:
    return np.arccos(np.clip(pts @ x, -1.0, 1.0))


def geodesic_median(points: Iterable[GeoPoint], trace: list | None = None) -> GeoPoint:
    """Point minimizing summed great-circle distance to ``points``.

    Weiszfeld iteration on the unit-sphere embedding: each step takes the
    distance-weighted mean of the inputs and re-projects onto the sphere. The
    weights ``1 / sin(theta)`` make the fixed point stationary for the arc-length
    objective. Duplicate coordinates are collapsed into multiplicities first.

    If ``trace`` is given, the objective (miles) at every iterate is appended.
    """
    points = list(points)
    if not points:
        raise ValueError("empty point set")

    # collapse duplicates; sort for permutation invariance
    counts: dict[tuple[float, float], int] = {}
    for p in points:
        counts[p.to_tuple()] = counts.get(p.to_tuple(), 0) + 1
    keys = sorted(counts)
    if len(keys) == 1:
        return GeoPoint(*keys[0])
    weights = np.array([counts[k] for k in keys], dtype=float)
    lat = np.array([k[0] for k in keys])
    lon = np.array([k[1] for k in keys])

    if len(keys) == 2:
        a, b = GeoPoint(*keys[0]), GeoPoint(*keys[1])
        if weights[0] == weights[1]:
            return great_circle_midpoint(a, b)
        return a if weights[0] > weights[1] else b

    pts = to_unit_vectors(lat, lon)

    def objective(x):
        return float(weights @ _arc(x, pts)) * EARTH_RADIUS_MILES

    x = weights @ pts
    if np.linalg.norm(x) < 1e-12:
        x = pts[int(np.argmax(weights))].copy()
    x /= np.linalg.norm(x)
    if trace is not None:
        trace.append(objective(x))

    f = objective(x)
    for _ in range(WEISZFELD_MAX_ITER):
        theta = np.maximum(_arc(x, pts), COINCIDENCE_EPS)
        w = weights / np.sin(np.minimum(theta, math.pi - COINCIDENCE_EPS))
        x_new = w @ pts
        norm = np.linalg.norm(x_new)
        if norm < 1e-15:
            break
        x_new /= norm
        f_new = objective(x_new)
        # backtrack along the chord if a step overshoots (only far from clustered data)
        halvings = 0
        while f_new > f and halvings < 30:
            x_new = x + 0.5 * (x_new - x)
            x_new /= np.linalg.norm(x_new)
            f_new = objective(x_new)
            halvings += 1
        if f_new > f:
            break
        step = math.acos(max(-1.0, min(1.0, float(x_new @ x))))
        x, f = x_new, f_new
        if trace is not None:
            trace.append(f)
        if step < WEISZFELD_TOL:
            break

    # the optimum may sit on a data point, where the iteration only creeps
    if len(pts) <= 4000:
        vertex_obj = (np.arccos(np.clip(pts @ pts.T, -1.0, 1.0)) @ weights) * EARTH_RADIUS_MILES
        i = int(np.argmin(vertex_obj))
        if vertex_obj[i] < f:
            return GeoPoint(float(lat[i]), float(lon[i]))
    return from_unit_vector(x)
