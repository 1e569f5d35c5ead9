import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geoloc.geo import (EARTH_RADIUS_MILES, GeoPoint, geodesic_median, great_circle_midpoint,
                        haversine_array, haversine_miles, summed_distance)

lats = st.floats(min_value=-89.0, max_value=89.0, allow_nan=False)
lons = st.floats(min_value=-179.9, max_value=180.0, allow_nan=False)
points = st.builds(GeoPoint, lats, lons)


def law_of_cosines(a, b):
    p1, l1, p2, l2 = map(math.radians, (a.lat, a.lon, b.lat, b.lon))
    c = math.sin(p1) * math.sin(p2) + math.cos(p1) * math.cos(p2) * math.cos(l2 - l1)
    return EARTH_RADIUS_MILES * math.acos(max(-1.0, min(1.0, c)))


def test_geopoint_validation():
    with pytest.raises(ValueError):
        GeoPoint(91, 0)
    assert GeoPoint(0, -180).lon == 180.0
    assert GeoPoint(0, 190).lon == pytest.approx(-170.0)


def test_identity_distance():
    p = GeoPoint(40.0, -75.0)
    assert haversine_miles(p, p) == 0.0


def test_antipodal():
    assert haversine_miles(GeoPoint(0, 0), GeoPoint(0, 180)) == pytest.approx(math.pi * EARTH_RADIUS_MILES)
    assert haversine_miles(GeoPoint(0, 0), GeoPoint(0, 180)) == pytest.approx(12436.8, abs=0.1)


def test_nyc_london_against_cosine_oracle():
    nyc, london = GeoPoint(40.7128, -74.0060), GeoPoint(51.5074, -0.1278)
    # frozen from the spherical law of cosines
    assert haversine_miles(nyc, london) == pytest.approx(3461.1803480691055, abs=0.1)
    assert abs(haversine_miles(nyc, london) - law_of_cosines(nyc, london)) < 0.1


@given(points, points)
def test_symmetry(a, b):
    assert haversine_miles(a, b) == pytest.approx(haversine_miles(b, a), abs=1e-9)


@given(points, points, points)
def test_triangle_inequality(a, b, c):
    assert haversine_miles(a, c) <= haversine_miles(a, b) + haversine_miles(b, c) + 1e-6


@given(points, points)
def test_vectorized_matches_scalar(a, b):
    v = haversine_array(np.array([a.lat]), np.array([a.lon]), np.array([b.lat]), np.array([b.lon]))
    assert v[0] == pytest.approx(haversine_miles(a, b), abs=1e-9)


def test_median_empty():
    with pytest.raises(ValueError, match="empty point set"):
        geodesic_median([])


def test_median_single():
    p = GeoPoint(12.5, 99.0)
    assert geodesic_median([p]) == p


def test_median_symmetric_square():
    pts = [GeoPoint(45 + dy, 10 + dx) for dy in (-1, 1) for dx in (-1, 1)]
    m = geodesic_median(pts)
    # east-west symmetric; meridian convergence pulls the spherical optimum ~1.5 mi poleward
    assert m.lon == pytest.approx(10.0, abs=1e-9)
    assert haversine_miles(m, GeoPoint(45, 10)) < 2.0
    assert haversine_miles(m, grid_minimizer(pts, step=0.001)) < 0.1
    assert summed_distance(m, pts) < summed_distance(GeoPoint(45, 10), pts)


def test_median_two_points_is_midpoint():
    a, b = GeoPoint(40, -75), GeoPoint(34, -118)
    m = geodesic_median([a, b])
    assert m == great_circle_midpoint(a, b)
    assert haversine_miles(a, m) == pytest.approx(haversine_miles(b, m), abs=1e-6)


def grid_minimizer(pts, step=0.01, pad=0.05):
    la = np.array([p.lat for p in pts])
    lo = np.array([p.lon for p in pts])
    glat = np.arange(la.min() - pad, la.max() + pad + step / 2, step)
    glon = np.arange(lo.min() - pad, lo.max() + pad + step / 2, step)
    best = (math.inf, None)
    for y in glat:
        d = haversine_array(np.full((len(glon), 1), y), glon[:, None], la[None, :], lo[None, :]).sum(1)
        i = int(np.argmin(d))
        if d[i] < best[0]:
            best = (float(d[i]), GeoPoint(float(y), float(glon[i])))
    return best[1]


def test_median_matches_grid_oracle():
    rng = np.random.default_rng(42)
    center = (38.0, -95.0)
    pts = [GeoPoint(*(np.array(center) + rng.normal(0, 0.4, 2))) for _ in range(20)]
    oracle = grid_minimizer(pts)
    assert haversine_miles(geodesic_median(pts), oracle) < 5.0


clustered = st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=25)


@settings(max_examples=60, deadline=None)
@given(clustered, st.floats(-60, 60), st.floats(-170, 170))
def test_median_no_worse_than_any_input(offsets, clat, clon):
    pts = [GeoPoint(clat + a, clon + b) for a, b in offsets]
    m = geodesic_median(pts)
    f = summed_distance(m, pts)
    for p in pts:
        assert f <= summed_distance(p, pts) + 1e-6


@settings(max_examples=40, deadline=None)
@given(clustered, st.randoms(use_true_random=False))
def test_median_permutation_invariant(offsets, rnd):
    pts = [GeoPoint(40 + a, -90 + b) for a, b in offsets]
    shuffled = list(pts)
    rnd.shuffle(shuffled)
    assert geodesic_median(pts) == geodesic_median(shuffled)


@settings(max_examples=40, deadline=None)
@given(clustered)
def test_weiszfeld_objective_never_increases(offsets):
    pts = [GeoPoint(20 + a, 30 + b) for a, b in offsets]
    trace = []
    geodesic_median(pts, trace=trace)
    assert all(b <= a + 1e-9 for a, b in zip(trace, trace[1:]))
