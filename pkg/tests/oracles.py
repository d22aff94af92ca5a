"""Brute-force reference implementations used to check the library."""
import numpy as np

R = 6_371_008.8


def great_circle(lat, lon, lats, lons):
    """atan2 form of the spherical distance, independent of the library kernel."""
    p1, p2 = np.radians(lat), np.radians(np.asarray(lats, float))
    dl = np.radians(np.asarray(lons, float) - lon)
    num = np.hypot(np.cos(p2) * np.sin(dl), np.cos(p1) * np.sin(p2) - np.sin(p1) * np.cos(p2) * np.cos(dl))
    den = np.sin(p1) * np.sin(p2) + np.cos(p1) * np.cos(p2) * np.cos(dl)
    return R * np.arctan2(num, den)


def coords(points):
    return (np.array([p.location.lat for p in points]), np.array([p.location.lon for p in points]))


def features_for(layers, radius):
    """Dict id -> (libDist, parkDist, schoolDist, transitDist, priceDiff, vacantDensity, crimeDensity)."""
    infra = [coords(getattr(layers, k)) for k in ("libraries", "parks", "schools", "transit")]
    lot_lat, lot_lon = coords(layers.lots)
    crime_lat, crime_lon = coords(layers.crime)
    years = sorted({a.year for a in layers.assessments})
    by_year = []
    for y in years:
        rows = [a for a in layers.assessments if a.year == y]
        by_year.append((*coords(rows), np.array([a.value for a in rows])))
    out = {}
    for lot in layers.lots:
        lat, lon = lot.location.lat, lot.location.lon
        dists = [float(great_circle(lat, lon, a, b).min()) for a, b in infra]
        means = []
        for a, b, v in by_year:
            inside = great_circle(lat, lon, a, b) <= radius
            means.append(v[inside].mean() if inside.any() else None)
        diff = 0.0 if len(means) != 2 or None in means else float(means[1] - means[0])
        near_lots = great_circle(lat, lon, lot_lat, lot_lon) <= radius
        vacant = int(near_lots.sum()) - 1  # the lot itself
        crime = int((great_circle(lat, lon, crime_lat, crime_lon) <= radius).sum())
        out[lot.id] = (*dists, diff, vacant, crime)
    return out


def quadrant_zone(lat, lon, bbox, order):
    """Zone of a point in the synthetic 2x2 grid (south-west, south-east, north-west, north-east)."""
    lat0, lon0, lat1, lon1 = bbox
    north = lat > (lat0 + lat1) / 2
    east = lon > (lon0 + lon1) / 2
    return order[2 * north + east]


def metrics_from_counts(counts):
    """Per-class (precision, recall, f1), macro averages and accuracy from counts[pred][actual]."""
    counts = np.asarray(counts)
    k = counts.shape[0]
    per = []
    for c in range(k):
        tp = counts[c, c]
        fp = sum(counts[c, a] for a in range(k) if a != c)
        fn = sum(counts[p, c] for p in range(k) if p != c)
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        per.append((p, r, f))
    macro = tuple(sum(x[i] for x in per) / k for i in range(3))
    acc = sum(counts[c, c] for c in range(k)) / counts.sum()
    return per, macro, acc
