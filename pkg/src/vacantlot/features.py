"""Per-lot determinants and the labelled modelling dataset.

Field names follow the column names of the features CSV (``libDist``,
``parkDist`` ...), so they are camelCase on purpose.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import MissingConversionLabels, SchemaError
from .geo import QUARTER_MILE_M, GeoPoint, PointIndex, haversine_distance
from .ingest import (
    ZONE_ORDER,
    CityLayers,
    Conversion,
    PropertyAssessment,
    Status,
    VacantLotRaw,
    Zone,
    ZoningLayer,
)

NUMERIC_FEATURES = (
    "libDist",
    "parkDist",
    "schoolDist",
    "transitDist",
    "priceDiff",
    "vacantDensity",
    "crimeDensity",
)
FEATURE_NAMES = NUMERIC_FEATURES + ("zone",)
CATEGORICAL_FEATURES = ("zone",)

FEATURE_COLUMNS = ("id", "lat", "lon") + FEATURE_NAMES
FLAG_COLUMNS = ("price_flag", "zone_flag")

# experiment tasks
BINARY = "binary"
CONVERTED_ONLY = "converted_only"
ALL_CLASSES = "all"


@dataclass(frozen=True)
class FeatureVector:
    libDist: float
    parkDist: float
    schoolDist: float
    transitDist: float
    priceDiff: float
    vacantDensity: int
    crimeDensity: int
    zone: Zone

    def numeric(self) -> tuple[float, ...]:
        return tuple(float(getattr(self, n)) for n in NUMERIC_FEATURES)

    def as_row(self) -> list[float]:
        """Numeric values followed by the zone code, in FEATURE_NAMES order."""
        return [*self.numeric(), float(ZONE_ORDER.index(self.zone))]


@dataclass(frozen=True)
class LabeledLot:
    id: str
    location: GeoPoint
    features: FeatureVector
    status: Status
    conversion: Conversion | None = None
    price_flag: bool = False
    zone_flag: bool = False


@dataclass(frozen=True)
class ModelingDataset:
    city: str
    rows: tuple[LabeledLot, ...]
    radius_m: float = QUARTER_MILE_M

    def __len__(self):
        return len(self.rows)

    def matrix(self, features: Sequence[str] = FEATURE_NAMES) -> np.ndarray:
        """Raw design matrix; the zone column holds its code in ZONE_ORDER."""
        full = np.array([r.features.as_row() for r in self.rows], dtype=float)
        full = full.reshape(len(self.rows), len(FEATURE_NAMES))
        cols = [FEATURE_NAMES.index(f) for f in features]
        return full[:, cols]

    def subset(self, positions: Iterable[int]) -> "ModelingDataset":
        return ModelingDataset(self.city, tuple(self.rows[i] for i in positions), self.radius_m)

    def has_conversions(self) -> bool:
        return any(r.conversion is not None for r in self.rows)


def task_labels(dataset: ModelingDataset, task: str = BINARY) -> tuple[list[int], list[str]]:
    """Row positions taking part in ``task`` and their string labels.

    ``binary`` uses every row (adopt / available). ``converted_only`` keeps
    adopted lots labelled by conversion type; ``all`` adds available lots as a
    fourth class.
    """
    if task == BINARY:
        return list(range(len(dataset))), [r.status.value for r in dataset.rows]
    if task not in (CONVERTED_ONLY, ALL_CLASSES):
        raise ValueError(f"unknown task {task!r}")
    positions, labels = [], []
    for i, r in enumerate(dataset.rows):
        if r.status is Status.ADOPT:
            if r.conversion is None:
                raise MissingConversionLabels(
                    f"{dataset.city}: adopted lot {r.id!r} has no conversion type"
                )
            positions.append(i)
            labels.append(r.conversion.value)
        elif task == ALL_CLASSES:
            positions.append(i)
            labels.append(r.status.value)
    if not positions:
        raise MissingConversionLabels(f"{dataset.city}: no conversion labels")
    return positions, labels


# ------------------------------------------------------------ feature ops


@dataclass
class CityIndexes:
    libraries: PointIndex
    parks: PointIndex
    schools: PointIndex
    transit: PointIndex
    lots: PointIndex
    crime: PointIndex
    assessments: dict[int, tuple[PointIndex, np.ndarray]] = field(default_factory=dict)

    @classmethod
    def build(cls, layers: CityLayers) -> "CityIndexes":
        def idx(points):
            return PointIndex((p.id, p.location) for p in points)

        return cls(
            libraries=idx(layers.libraries),
            parks=idx(layers.parks),
            schools=idx(layers.schools),
            transit=idx(layers.transit),
            lots=idx(layers.lots),
            crime=idx(layers.crime),
            assessments=assessment_indexes(layers.assessments),
        )


def assessment_indexes(assessments: Iterable[PropertyAssessment]):
    by_year: dict[int, list[PropertyAssessment]] = {}
    for a in assessments:
        by_year.setdefault(a.year, []).append(a)
    return {
        y: (PointIndex((a.id, a.location) for a in rows), np.array([a.value for a in rows]))
        for y, rows in sorted(by_year.items())
    }


def infrastructure_distances(lot: VacantLotRaw, idx: CityIndexes) -> tuple[float, float, float, float]:
    q = lot.location
    return (
        idx.libraries.nearest_distance(q),
        idx.parks.nearest_distance(q),
        idx.schools.nearest_distance(q),
        idx.transit.nearest_distance(q),
    )


def price_diff(location: GeoPoint, assessments, radius_m: float = QUARTER_MILE_M) -> tuple[float, bool]:
    """Later-year minus earlier-year mean assessed value within the radius.

    ``assessments`` is either a list of PropertyAssessment or the output of
    :func:`assessment_indexes`. Returns ``(diff, flag)``; the flag marks the
    imputed case where some year has no property in range (diff is then 0).
    """
    if not isinstance(assessments, dict):
        assessments = assessment_indexes(assessments)
    if len(assessments) != 2:
        return 0.0, True
    means = []
    for year in sorted(assessments):
        index, values = assessments[year]
        hits = index.within_radius(location, radius_m)
        if hits.size == 0:
            return 0.0, True
        means.append(float(np.mean(values[hits])))
    return means[1] - means[0], False


def vacant_density(lot: VacantLotRaw, lots_index: PointIndex, radius_m: float = QUARTER_MILE_M) -> int:
    return lots_index.count_within_radius(lot.location, radius_m, exclude_id=lot.id)


def crime_density(location: GeoPoint, crime_index: PointIndex, radius_m: float = QUARTER_MILE_M) -> int:
    return crime_index.count_within_radius(location, radius_m)


def assign_zone(location: GeoPoint, zoning: ZoningLayer) -> tuple[Zone, bool]:
    """Category of the first district containing the point.

    Points outside every district take the category of the district owning
    the nearest exterior vertex; the returned flag is True in that case.
    """
    for d in zoning.districts:
        if d.contains(location):
            return d.category, False
    best, best_d = None, float("inf")
    for d in zoning.districts:
        for poly in d.polygons:
            for v in poly.exterior:
                dist = haversine_distance(location, v)
                if dist < best_d:
                    best, best_d = d.category, dist
    return best, True


def lot_features(lot: VacantLotRaw, layers: CityLayers, idx: CityIndexes, radius_m: float) -> LabeledLot:
    lib, park, school, transit = infrastructure_distances(lot, idx)
    diff, price_flag = price_diff(lot.location, idx.assessments, radius_m)
    zone, zone_flag = assign_zone(lot.location, layers.zoning)
    fv = FeatureVector(
        libDist=lib,
        parkDist=park,
        schoolDist=school,
        transitDist=transit,
        priceDiff=diff,
        vacantDensity=vacant_density(lot, idx.lots, radius_m),
        crimeDensity=crime_density(lot.location, idx.crime, radius_m),
        zone=zone,
    )
    return LabeledLot(lot.id, lot.location, fv, lot.status, lot.conversion, price_flag, zone_flag)


def build_dataset(layers: CityLayers, radius_m: float = QUARTER_MILE_M, n_jobs: int = 1) -> ModelingDataset:
    """Compute every determinant for every lot; rows are sorted by lot id."""
    if radius_m <= 0:
        raise ValueError("radius must be positive")
    idx = CityIndexes.build(layers)
    lots = sorted(layers.lots, key=lambda lot: lot.id)
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            rows = list(pool.map(lambda lot: lot_features(lot, layers, idx, radius_m), lots))
    else:
        rows = [lot_features(lot, layers, idx, radius_m) for lot in lots]
    return ModelingDataset(layers.name, tuple(rows), radius_m)


# ------------------------------------------------------------------ I/O


def _fmt(x) -> str:
    return repr(float(x))


def write_features(dataset: ModelingDataset, path) -> None:
    with_conv = dataset.has_conversions()
    header = FEATURE_COLUMNS + ("status",) + (("conversion",) if with_conv else ()) + FLAG_COLUMNS
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in dataset.rows:
            f = r.features
            row = [
                r.id,
                _fmt(r.location.lat),
                _fmt(r.location.lon),
                *(_fmt(getattr(f, n)) for n in NUMERIC_FEATURES[:5]),
                str(f.vacantDensity),
                str(f.crimeDensity),
                f.zone.value,
                r.status.value,
            ]
            if with_conv:
                row.append(r.conversion.value if r.conversion else "")
            row += [str(int(r.price_flag)), str(int(r.zone_flag))]
            w.writerow(row)


def read_features(path, city: str | None = None, radius_m: float = QUARTER_MILE_M) -> ModelingDataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = tuple(reader.fieldnames or ())
        missing = [c for c in FEATURE_COLUMNS + ("status",) if c not in cols]
        if missing:
            raise SchemaError(f"{path}: missing feature columns {missing}")
        rows = []
        for rec in reader:
            line = reader.line_num
            try:
                fv = FeatureVector(
                    *(float(rec[n]) for n in NUMERIC_FEATURES[:5]),
                    int(rec["vacantDensity"]),
                    int(rec["crimeDensity"]),
                    Zone(rec["zone"]),
                )
                conv = rec.get("conversion") or None
                rows.append(
                    LabeledLot(
                        rec["id"],
                        GeoPoint(float(rec["lat"]), float(rec["lon"])),
                        fv,
                        Status(rec["status"]),
                        Conversion(conv) if conv else None,
                        rec.get("price_flag", "0") == "1",
                        rec.get("zone_flag", "0") == "1",
                    )
                )
            except (ValueError, TypeError) as exc:
                raise SchemaError(f"{path}:{line}: {exc}") from None
    return ModelingDataset(city or path.stem, tuple(rows), radius_m)


def dataset_geojson(dataset: ModelingDataset, extra: dict[str, Sequence] | None = None) -> dict:
    """One Point feature per lot carrying the feature-CSV properties.

    ``extra`` maps property names to per-row values (e.g. predictions).
    """
    extra = extra or {}
    feats = []
    for i, r in enumerate(dataset.rows):
        f = r.features
        props = {"id": r.id}
        props.update({n: getattr(f, n) for n in NUMERIC_FEATURES})
        props["zone"] = f.zone.value
        props["status"] = r.status.value
        if r.conversion is not None:
            props["conversion"] = r.conversion.value
        props["price_flag"] = int(r.price_flag)
        props["zone_flag"] = int(r.zone_flag)
        for k, values in extra.items():
            props[k] = values[i]
        feats.append(
            {
                "type": "Feature",
                "geometry": {"type": "Point", "coordinates": [r.location.lon, r.location.lat]},
                "properties": props,
            }
        )
    return {"type": "FeatureCollection", "features": feats}


def write_geojson(dataset: ModelingDataset, path, extra=None) -> None:
    Path(path).write_text(json.dumps(dataset_geojson(dataset, extra)) + "\n", encoding="utf-8")
