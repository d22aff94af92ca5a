"""Loading, validating and writing the raw city layers.

File formats
------------
lots.csv            ``id,lat,lon,status[,conversion]``
<kind>.csv          ``id,lat,lon`` (libraries, parks, schools, transit)
crime.csv           ``id,lat,lon,date`` (ISO 8601 date)
assessments.csv     ``id,lat,lon,year,value``
zoning.geojson      FeatureCollection of Polygon/MultiPolygon features with a
                    string ``category`` property

Every loader validates each row and raises with the offending line number.
Writers emit floats with ``repr`` so that load -> write -> load is exact.
"""
from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from .errors import (
    DuplicateId,
    MissingLayer,
    ParseError,
    RangeError,
    SchemaError,
    UnknownCategory,
)
from .geo import GeoPoint, GeoPolygon, point_in_polygon


class Status(str, Enum):
    AVAILABLE = "available"
    ADOPT = "adopt"


class Conversion(str, Enum):
    COMMUNITY_GARDEN = "community_garden"
    QCMOS = "qcmos"
    URBAN_FARM = "urban_farm"


class InfraKind(str, Enum):
    LIBRARY = "library"
    PARK = "park"
    SCHOOL = "school"
    TRANSIT_STOP = "transit"


class Zone(str, Enum):
    RESIDENTIAL = "residential"
    INDUSTRIAL = "industrial"
    BUSINESS = "business"
    SPECIAL_PURPOSE = "special_purpose"


# fixed one-hot / code order
ZONE_ORDER = (Zone.RESIDENTIAL, Zone.INDUSTRIAL, Zone.BUSINESS, Zone.SPECIAL_PURPOSE)


@dataclass(frozen=True)
class VacantLotRaw:
    id: str
    location: GeoPoint
    status: Status
    conversion: Conversion | None = None

    def __post_init__(self):
        if self.conversion is not None and self.status is not Status.ADOPT:
            raise ValueError("conversion given for a lot that is not adopted")


@dataclass(frozen=True)
class InfraPoint:
    id: str
    location: GeoPoint
    kind: InfraKind


@dataclass(frozen=True)
class CrimeIncident:
    id: str
    location: GeoPoint
    date: dt.date


@dataclass(frozen=True)
class PropertyAssessment:
    id: str
    location: GeoPoint
    year: int
    value: float


@dataclass(frozen=True)
class ZoningDistrict:
    polygons: tuple[GeoPolygon, ...]
    category: Zone

    def contains(self, q: GeoPoint) -> bool:
        return any(point_in_polygon(p, q) for p in self.polygons)


@dataclass(frozen=True)
class ZoningLayer:
    districts: tuple[ZoningDistrict, ...]

    def __post_init__(self):
        if not self.districts:
            raise SchemaError("zoning layer has no districts")

    def __len__(self):
        return len(self.districts)


@dataclass(frozen=True)
class CityLayers:
    name: str
    lots: tuple[VacantLotRaw, ...]
    libraries: tuple[InfraPoint, ...]
    parks: tuple[InfraPoint, ...]
    schools: tuple[InfraPoint, ...]
    transit: tuple[InfraPoint, ...]
    crime: tuple[CrimeIncident, ...]
    assessments: tuple[PropertyAssessment, ...]
    zoning: ZoningLayer

    def summary(self) -> dict[str, int]:
        return {
            "lots": len(self.lots),
            "adopt": sum(lot.status is Status.ADOPT for lot in self.lots),
            "libraries": len(self.libraries),
            "parks": len(self.parks),
            "schools": len(self.schools),
            "transit": len(self.transit),
            "crime": len(self.crime),
            "assessments": len(self.assessments),
            "zoning_districts": len(self.zoning),
        }


LOT_COLUMNS = ("id", "lat", "lon", "status")
POINT_COLUMNS = ("id", "lat", "lon")
CRIME_COLUMNS = POINT_COLUMNS + ("date",)
ASSESSMENT_COLUMNS = POINT_COLUMNS + ("year", "value")

# file names used by load_city / write_city
LAYER_FILES = {
    "lots": "lots.csv",
    "libraries": "libraries.csv",
    "parks": "parks.csv",
    "schools": "schools.csv",
    "transit": "transit.csv",
    "crime": "crime.csv",
    "assessments": "assessments.csv",
    "zoning": "zoning.geojson",
}
_LAYER_KIND = {
    "libraries": InfraKind.LIBRARY,
    "parks": InfraKind.PARK,
    "schools": InfraKind.SCHOOL,
    "transit": InfraKind.TRANSIT_STOP,
}


def _require(path, layer: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise MissingLayer(layer, path)
    return path


def _read_rows(path, expected: Sequence[Sequence[str]]):
    """Yield ``(line_no, row_dict)`` after checking the header."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(1, "missing header row", path) from None
        header = [h.strip() for h in header]
        if tuple(header) not in {tuple(e) for e in expected}:
            want = " or ".join(",".join(e) for e in expected)
            raise ParseError(1, f"header {','.join(header)!r} does not match {want!r}", path)
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(line, f"expected {len(header)} fields, got {len(row)}", path)
            yield line, dict(zip(header, (c.strip() for c in row)))


def _float(value: str, name: str, line: int, path) -> float:
    try:
        x = float(value)
    except ValueError:
        raise ParseError(line, f"{name} {value!r} is not a number", path) from None
    if not math.isfinite(x):
        raise RangeError(line, f"{name} {value!r} is not finite", path)
    return x


def _point(row: dict, line: int, path) -> GeoPoint:
    lat = _float(row["lat"], "lat", line, path)
    lon = _float(row["lon"], "lon", line, path)
    try:
        return GeoPoint(lat, lon)
    except ValueError as exc:
        raise RangeError(line, str(exc), path) from None


def _check_id(row: dict, seen: set, line: int, path) -> str:
    pid = row["id"]
    if not pid:
        raise ParseError(line, "empty id", path)
    if pid in seen:
        raise DuplicateId(line, f"duplicate id {pid!r}", path)
    seen.add(pid)
    return pid


def _enum(cls, value: str, name: str, line: int, path):
    try:
        return cls(value.lower())
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise ParseError(line, f"{name} {value!r} not in {{{allowed}}}", path) from None


def load_lots(path) -> list[VacantLotRaw]:
    _require(path, "lots")
    lots, seen = [], set()
    for line, row in _read_rows(path, [LOT_COLUMNS, LOT_COLUMNS + ("conversion",)]):
        pid = _check_id(row, seen, line, path)
        loc = _point(row, line, path)
        status = _enum(Status, row["status"], "status", line, path)
        conv_raw = row.get("conversion", "")
        conversion = _enum(Conversion, conv_raw, "conversion", line, path) if conv_raw else None
        if conversion is not None and status is not Status.ADOPT:
            raise ParseError(line, "conversion given for a lot that is not adopted", path)
        lots.append(VacantLotRaw(pid, loc, status, conversion))
    return lots


def load_point_layer(path, kind: str, report_year: int | None = None) -> list:
    """Load an infrastructure, crime or assessment layer.

    ``kind`` is one of ``library``, ``park``, ``school``, ``transit``,
    ``crime`` or ``assessment``. For crime, ``report_year`` restricts
    incident dates to that calendar year.
    """
    _require(path, kind)
    seen: set = set()
    out: list = []
    if kind == "crime":
        for line, row in _read_rows(path, [CRIME_COLUMNS]):
            pid = _check_id(row, seen, line, path)
            loc = _point(row, line, path)
            try:
                date = dt.date.fromisoformat(row["date"])
            except ValueError:
                raise ParseError(line, f"date {row['date']!r} is not ISO 8601", path) from None
            if report_year is not None and date.year != report_year:
                raise RangeError(line, f"date {date} outside report year {report_year}", path)
            out.append(CrimeIncident(pid, loc, date))
        return out
    if kind == "assessment":
        for line, row in _read_rows(path, [ASSESSMENT_COLUMNS]):
            pid = _check_id(row, seen, line, path)
            loc = _point(row, line, path)
            try:
                year = int(row["year"])
            except ValueError:
                raise ParseError(line, f"year {row['year']!r} is not an integer", path) from None
            value = _float(row["value"], "value", line, path)
            if value < 0:
                raise RangeError(line, f"negative assessed value {value}", path)
            out.append(PropertyAssessment(pid, loc, year, value))
        years = {a.year for a in out}
        if out and len(years) != 2:
            raise SchemaError(
                f"{path}: assessments must cover exactly two years, found {sorted(years)}"
            )
        return out
    try:
        infra_kind = InfraKind(kind)
    except ValueError:
        raise ValueError(f"unknown point layer kind {kind!r}") from None
    for line, row in _read_rows(path, [POINT_COLUMNS]):
        pid = _check_id(row, seen, line, path)
        out.append(InfraPoint(pid, _point(row, line, path), infra_kind))
    return out


def _ring(coords, where: str) -> tuple[GeoPoint, ...]:
    try:
        return tuple(GeoPoint(float(c[1]), float(c[0])) for c in coords)
    except (TypeError, ValueError, IndexError) as exc:
        raise ParseError(where, f"bad ring coordinates: {exc}") from None


def _polygon(rings, where: str) -> GeoPolygon:
    if not rings:
        raise ParseError(where, "polygon without rings")
    try:
        return GeoPolygon(_ring(rings[0], where), tuple(_ring(r, where) for r in rings[1:]))
    except ValueError as exc:
        raise ParseError(where, str(exc)) from None


def load_zoning(path) -> ZoningLayer:
    path = _require(path, "zoning")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, f"invalid JSON: {exc.msg}", path) from None
    if doc.get("type") != "FeatureCollection":
        raise ParseError(1, "expected a GeoJSON FeatureCollection", path)
    districts = []
    for i, feat in enumerate(doc.get("features", [])):
        where = f"{path.name} feature {i}"
        props = feat.get("properties") or {}
        name = props.get("category")
        if not isinstance(name, str):
            raise ParseError(where, "missing string property 'category'")
        try:
            category = Zone(name.strip().lower())
        except ValueError:
            raise UnknownCategory(name) from None
        geom = feat.get("geometry") or {}
        gtype, coords = geom.get("type"), geom.get("coordinates")
        if gtype == "Polygon":
            polys = (_polygon(coords, where),)
        elif gtype == "MultiPolygon":
            polys = tuple(_polygon(c, where) for c in coords)
        else:
            raise ParseError(where, f"unsupported geometry type {gtype!r}")
        districts.append(ZoningDistrict(polys, category))
    if not districts:
        raise SchemaError(f"{path}: zoning layer has no districts")
    return ZoningLayer(tuple(districts))


def assemble(
    city_name: str,
    lots: Iterable[VacantLotRaw],
    libraries: Iterable[InfraPoint],
    parks: Iterable[InfraPoint],
    schools: Iterable[InfraPoint],
    transit: Iterable[InfraPoint],
    crime: Iterable[CrimeIncident],
    assessments: Iterable[PropertyAssessment],
    zoning: ZoningLayer,
) -> CityLayers:
    layers = CityLayers(
        name=city_name,
        lots=tuple(lots),
        libraries=tuple(libraries),
        parks=tuple(parks),
        schools=tuple(schools),
        transit=tuple(transit),
        crime=tuple(crime),
        assessments=tuple(assessments),
        zoning=zoning,
    )
    for attr, kind in _LAYER_KIND.items():
        if not getattr(layers, attr):
            raise MissingLayer(kind.value)
    if not layers.lots:
        raise MissingLayer("lots")
    return layers


# ---------------------------------------------------------------- writers


def _fmt(x: float) -> str:
    return repr(float(x))


def write_lots(lots: Iterable[VacantLotRaw], path) -> None:
    lots = list(lots)
    with_conv = any(lot.conversion is not None for lot in lots)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LOT_COLUMNS + (("conversion",) if with_conv else ()))
        for lot in lots:
            row = [lot.id, _fmt(lot.location.lat), _fmt(lot.location.lon), lot.status.value]
            if with_conv:
                row.append(lot.conversion.value if lot.conversion else "")
            w.writerow(row)


def write_point_layer(points: Iterable, path) -> None:
    points = list(points)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        first = points[0] if points else None
        if isinstance(first, CrimeIncident):
            w.writerow(CRIME_COLUMNS)
            for p in points:
                w.writerow([p.id, _fmt(p.location.lat), _fmt(p.location.lon), p.date.isoformat()])
        elif isinstance(first, PropertyAssessment):
            w.writerow(ASSESSMENT_COLUMNS)
            for p in points:
                w.writerow(
                    [p.id, _fmt(p.location.lat), _fmt(p.location.lon), str(p.year), _fmt(p.value)]
                )
        else:
            w.writerow(POINT_COLUMNS)
            for p in points:
                w.writerow([p.id, _fmt(p.location.lat), _fmt(p.location.lon)])


def _ring_coords(ring) -> list:
    pts = [[p.lon, p.lat] for p in ring]
    return pts + [pts[0]]


def zoning_to_geojson(zoning: ZoningLayer) -> dict:
    features = []
    for d in zoning.districts:
        polys = [[_ring_coords(r) for r in p.rings] for p in d.polygons]
        if len(polys) == 1:
            geom = {"type": "Polygon", "coordinates": polys[0]}
        else:
            geom = {"type": "MultiPolygon", "coordinates": polys}
        features.append(
            {"type": "Feature", "properties": {"category": d.category.value}, "geometry": geom}
        )
    return {"type": "FeatureCollection", "features": features}


def write_zoning(zoning: ZoningLayer, path) -> None:
    Path(path).write_text(json.dumps(zoning_to_geojson(zoning), indent=1) + "\n", encoding="utf-8")


def write_city(layers: CityLayers, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_lots(layers.lots, d / LAYER_FILES["lots"])
    for attr in ("libraries", "parks", "schools", "transit", "crime", "assessments"):
        pts = getattr(layers, attr)
        if not pts and attr == "crime":
            (d / LAYER_FILES[attr]).write_text(",".join(CRIME_COLUMNS) + "\n")
        elif not pts and attr == "assessments":
            (d / LAYER_FILES[attr]).write_text(",".join(ASSESSMENT_COLUMNS) + "\n")
        else:
            write_point_layer(pts, d / LAYER_FILES[attr])
    write_zoning(layers.zoning, d / LAYER_FILES["zoning"])
    return d


def load_city(directory, name: str | None = None, report_year: int | None = None) -> CityLayers:
    """Load a directory laid out as by :func:`write_city`."""
    d = Path(directory)
    return assemble(
        name or d.name,
        load_lots(d / LAYER_FILES["lots"]),
        *(load_point_layer(d / LAYER_FILES[a], k.value) for a, k in _LAYER_KIND.items()),
        load_point_layer(d / LAYER_FILES["crime"], "crime", report_year),
        load_point_layer(d / LAYER_FILES["assessments"], "assessment"),
        load_zoning(d / LAYER_FILES["zoning"]),
    )
