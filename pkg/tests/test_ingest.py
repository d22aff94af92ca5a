import datetime as dt
import json

import pytest

from conftest import write_text
from vacantlot.errors import DuplicateId, MissingLayer, ParseError, RangeError, SchemaError, UnknownCategory
from vacantlot.ingest import (
    LAYER_FILES,
    Conversion,
    Status,
    Zone,
    assemble,
    load_city,
    load_lots,
    load_point_layer,
    load_zoning,
    write_city,
)


def test_three_lots(tmp_path):
    p = write_text(tmp_path / "lots.csv", "id,lat,lon,status\na,39.3,-76.6,available\nb,39.31,-76.6,adopt\n"
                                          "c,39.32,-76.6,adopt\n")
    lots = load_lots(p)
    assert [lot.id for lot in lots] == ["a", "b", "c"]
    assert [lot.status for lot in lots] == [Status.AVAILABLE, Status.ADOPT, Status.ADOPT]
    assert all(lot.conversion is None for lot in lots)


def test_conversion_column(tmp_path):
    p = write_text(tmp_path / "lots.csv", "id,lat,lon,status,conversion\na,39.3,-76.6,adopt,qcmos\n"
                                          "b,39.3,-76.6,available,\nc,39.3,-76.6,adopt,\n")
    lots = load_lots(p)
    assert lots[0].conversion is Conversion.QCMOS
    assert lots[1].conversion is None
    assert lots[2].conversion is None  # legal for the binary pipeline


def test_latitude_out_of_range_names_line(tmp_path):
    p = write_text(tmp_path / "lots.csv", "id,lat,lon,status\na,39.3,-76.6,adopt\nb,95,-76.6,adopt\n")
    with pytest.raises(RangeError) as info:
        load_lots(p)
    assert info.value.line == 3
    assert ":3:" in str(info.value)


def test_duplicate_id(tmp_path):
    p = write_text(tmp_path / "lots.csv", "id,lat,lon,status\na,39.3,-76.6,adopt\na,39.4,-76.6,adopt\n")
    with pytest.raises(DuplicateId):
        load_lots(p)


@pytest.mark.parametrize("body,reason", [
    ("a,39.3,-76.6,maybe\n", "status"),
    ("a,abc,-76.6,adopt\n", "not a number"),
    ("a,39.3,-76.6\n", "fields"),
    ("a,39.3,-76.6,available,qcmos\n", "not adopted"),
])
def test_malformed_rows(tmp_path, body, reason):
    header = "id,lat,lon,status,conversion\n" if body.count(",") == 4 else "id,lat,lon,status\n"
    p = write_text(tmp_path / "lots.csv", header + body)
    with pytest.raises(ParseError, match=reason):
        load_lots(p)


def test_bad_header(tmp_path):
    p = write_text(tmp_path / "lots.csv", "id,latitude,lon,status\n")
    with pytest.raises(ParseError):
        load_lots(p)


def test_missing_file_names_layer(tmp_path):
    with pytest.raises(MissingLayer, match="library"):
        load_point_layer(tmp_path / "nope.csv", "library")


def test_empty_point_layer(tmp_path):
    p = write_text(tmp_path / "parks.csv", "id,lat,lon\n")
    assert load_point_layer(p, "park") == []


def test_crime_window(tmp_path):
    p = write_text(tmp_path / "crime.csv", "id,lat,lon,date\nc1,39.3,-76.6,2015-06-01\n")
    (inc,) = load_point_layer(p, "crime", report_year=2015)
    assert inc.date == dt.date(2015, 6, 1)
    late = write_text(tmp_path / "crime2.csv", "id,lat,lon,date\nc1,39.3,-76.6,2016-01-01\n")
    with pytest.raises(RangeError):
        load_point_layer(late, "crime", report_year=2015)
    bad = write_text(tmp_path / "crime3.csv", "id,lat,lon,date\nc1,39.3,-76.6,June 1\n")
    with pytest.raises(ParseError):
        load_point_layer(bad, "crime")


def test_assessments_need_two_years(tmp_path):
    ok = write_text(tmp_path / "a.csv", "id,lat,lon,year,value\np1,39.3,-76.6,2014,100\np2,39.3,-76.6,2015,110\n")
    assert len(load_point_layer(ok, "assessment")) == 2
    three = write_text(tmp_path / "b.csv", "id,lat,lon,year,value\np1,39.3,-76.6,2013,1\np2,39.3,-76.6,2014,1\n"
                                           "p3,39.3,-76.6,2015,1\n")
    with pytest.raises(SchemaError, match="exactly two years"):
        load_point_layer(three, "assessment")
    neg = write_text(tmp_path / "c.csv", "id,lat,lon,year,value\np1,39.3,-76.6,2014,-5\n")
    with pytest.raises(RangeError):
        load_point_layer(neg, "assessment")


def zoning_doc(*features):
    return {"type": "FeatureCollection", "features": list(features)}


def square_feature(category, x0=-76.7, y0=39.2, x1=-76.5, y1=39.4):
    ring = [[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]
    return {"type": "Feature", "properties": {"category": category},
            "geometry": {"type": "Polygon", "coordinates": [ring]}}


def test_one_square_district(tmp_path):
    p = write_text(tmp_path / "z.geojson", json.dumps(zoning_doc(square_feature("residential"))))
    layer = load_zoning(p)
    assert len(layer) == 1
    assert layer.districts[0].category is Zone.RESIDENTIAL


def test_four_categories_and_multipolygon(tmp_path):
    feats = [square_feature(z.value) for z in Zone]
    multi = square_feature("business")
    multi["geometry"] = {"type": "MultiPolygon",
                         "coordinates": [multi["geometry"]["coordinates"], multi["geometry"]["coordinates"]]}
    p = write_text(tmp_path / "z.geojson", json.dumps(zoning_doc(*feats, multi)))
    layer = load_zoning(p)
    assert {d.category for d in layer.districts} == set(Zone)
    assert len(layer.districts[-1].polygons) == 2


def test_unknown_category(tmp_path):
    p = write_text(tmp_path / "z.geojson", json.dumps(zoning_doc(square_feature("agricultural"))))
    with pytest.raises(UnknownCategory) as info:
        load_zoning(p)
    assert info.value.name == "agricultural"


@pytest.mark.parametrize("text", ["{not json", json.dumps({"type": "Feature"}),
                                  json.dumps(zoning_doc({"type": "Feature", "properties": {},
                                                         "geometry": None}))])
def test_malformed_zoning(tmp_path, text):
    p = write_text(tmp_path / "z.geojson", text)
    with pytest.raises(ParseError):
        load_zoning(p)


def test_empty_zoning_layer(tmp_path):
    p = write_text(tmp_path / "z.geojson", json.dumps(zoning_doc()))
    with pytest.raises(SchemaError):
        load_zoning(p)


def test_assemble_requires_infrastructure(small_city):
    layers = small_city[0]
    args = [layers.name, layers.lots, (), layers.parks, layers.schools, layers.transit, layers.crime,
            layers.assessments, layers.zoning]
    with pytest.raises(MissingLayer) as info:
        assemble(*args)
    assert info.value.kind == "library"


def test_assemble_keeps_every_row(small_city):
    layers = small_city[0]
    rebuilt = assemble(layers.name, list(layers.lots), list(layers.libraries), list(layers.parks),
                       list(layers.schools), list(layers.transit), list(layers.crime), list(layers.assessments),
                       layers.zoning)
    assert rebuilt.summary() == layers.summary()
    assert rebuilt == layers


def test_city_round_trip(small_city, tmp_path):
    layers = small_city[0]
    write_city(layers, tmp_path / "a")
    once = load_city(tmp_path / "a", layers.name)
    assert once == layers
    write_city(once, tmp_path / "b")
    for name in LAYER_FILES.values():
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
