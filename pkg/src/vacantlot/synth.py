"""Seeded synthetic cities with a planted conversion rule.

Every layer is uniform in a lat/lon box; zoning is a 2x2 grid of districts
covering the box, one per category. Labels come from a linear rule over the
standardised determinants (one-hot zone), optionally flipped with
probability ``noise``. Adopted lots get a conversion type from the
terciles of a density score.
"""
from __future__ import annotations

import configparser
import datetime as dt
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .features import NUMERIC_FEATURES, ModelingDataset, build_dataset
from .geo import QUARTER_MILE_M, GeoPoint, GeoPolygon
from .ingest import (
    ZONE_ORDER,
    CityLayers,
    Conversion,
    CrimeIncident,
    InfraKind,
    InfraPoint,
    PropertyAssessment,
    Status,
    VacantLotRaw,
    ZoningDistrict,
    ZoningLayer,
    assemble,
)

# adopt share of the larger reference city (887 of 1907 lots)
DEFAULT_ADOPT_FRACTION = 887 / 1907

DEFAULT_WEIGHTS = {
    "libDist": -1.0,
    "parkDist": -1.0,
    "schoolDist": -1.0,
    "transitDist": -0.3,
    "priceDiff": 0.2,
    "vacantDensity": 0.4,
    "crimeDensity": -0.4,
    "residential": 0.3,
    "industrial": -0.3,
    "business": 0.0,
    "special_purpose": 0.0,
}
RULE_TERMS = tuple(DEFAULT_WEIGHTS)
CONVERSION_TERCILES = (Conversion.COMMUNITY_GARDEN, Conversion.QCMOS, Conversion.URBAN_FARM)


@dataclass(frozen=True)
class SynthConfig:
    name: str = "synthetic"
    n_lots: int = 2000
    n_per_infrastructure_kind: int = 6
    n_crime: int = 10000
    n_properties_per_year: int = 4000
    # lat_min, lon_min, lat_max, lon_max; roughly 3 km x 3 km
    bbox: tuple[float, float, float, float] = (39.28, -76.64, 39.307, -76.605)
    weights: dict = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    threshold: float | None = None  # None -> quantile giving adopt_fraction
    adopt_fraction: float = DEFAULT_ADOPT_FRACTION
    noise: float = 0.0
    report_year: int = 2015
    assessment_years: tuple[int, int] = (2014, 2015)
    price_trend: float = 0.05  # mean log growth between the two years
    price_gradient: float = 0.10  # extra log growth across the box, west to east
    radius_m: float = QUARTER_MILE_M
    seed: int = 0
    infrastructure_seed: int | None = None  # None -> seed

    def __post_init__(self):
        counts = (self.n_lots, self.n_per_infrastructure_kind, self.n_crime, self.n_properties_per_year)
        if min(counts) < 1:
            raise ValueError("all synthetic layer counts must be at least 1")
        if not 0.0 <= self.noise < 0.5:
            raise ValueError("label noise must lie in [0, 0.5)")
        lat0, lon0, lat1, lon1 = self.bbox
        if not (lat0 < lat1 and lon0 < lon1):
            raise ValueError("bounding box is degenerate")
        GeoPoint(lat0, lon0), GeoPoint(lat1, lon1)
        unknown = set(self.weights) - set(RULE_TERMS)
        if unknown:
            raise ValueError(f"unknown rule terms {sorted(unknown)}")
        if not 0.0 < self.adopt_fraction < 1.0:
            raise ValueError("adopt_fraction must lie in (0, 1)")


@dataclass(frozen=True)
class CityShift:
    """How the second city of a pair departs from the first.

    Scales multiply the first city's counts; ``weight_noise`` is the standard
    deviation of a Gaussian perturbation added to every rule weight.
    """

    infra_scale: float = 1.0
    crime_scale: float = 1.0
    lot_scale: float = 1.0
    price_trend_offset: float = 0.0
    weight_noise: float = 0.0
    name: str | None = None

    @property
    def is_zero(self) -> bool:
        return (self.infra_scale, self.crime_scale, self.lot_scale, self.price_trend_offset,
                self.weight_noise) == (1.0, 1.0, 1.0, 0.0, 0.0)


# a shift large enough to hurt pure transfer while mixed training recovers
TRANSFER_SHIFT = CityShift(infra_scale=0.5, weight_noise=0.3)


@dataclass(frozen=True)
class PlantedRule:
    """Linear rule ``w . x~ > threshold`` over standardised determinants."""

    weights: dict
    mean: tuple[float, ...]
    std: tuple[float, ...]
    threshold: float

    @staticmethod
    def design(dataset: ModelingDataset) -> np.ndarray:
        """Numeric determinants followed by the one-hot zone block."""
        num = dataset.matrix(NUMERIC_FEATURES)
        codes = dataset.matrix(("zone",))[:, 0].astype(int)
        onehot = np.zeros((len(codes), len(ZONE_ORDER)))
        onehot[np.arange(len(codes)), codes] = 1.0
        return np.hstack([num, onehot])

    def weight_vector(self) -> np.ndarray:
        return np.array([self.weights.get(t, 0.0) for t in RULE_TERMS])

    def scores(self, dataset: ModelingDataset) -> np.ndarray:
        X = self.design(dataset)
        n_num = len(NUMERIC_FEATURES)
        X[:, :n_num] = (X[:, :n_num] - np.array(self.mean)) / np.array(self.std)
        return X @ self.weight_vector()

    def labels(self, dataset: ModelingDataset) -> np.ndarray:
        return self.scores(dataset) > self.threshold


def _uniform_points(rng, n, bbox):
    lat0, lon0, lat1, lon1 = bbox
    return np.column_stack([rng.uniform(lat0, lat1, n), rng.uniform(lon0, lon1, n)])


def _quadrant_zoning(bbox) -> ZoningLayer:
    lat0, lon0, lat1, lon1 = bbox
    lat_m, lon_m = (lat0 + lat1) / 2, (lon0 + lon1) / 2
    cells = [
        (lat0, lon0, lat_m, lon_m),  # south-west
        (lat0, lon_m, lat_m, lon1),  # south-east
        (lat_m, lon0, lat1, lon_m),  # north-west
        (lat_m, lon_m, lat1, lon1),  # north-east
    ]
    districts = []
    for (a0, o0, a1, o1), zone in zip(cells, ZONE_ORDER):
        ring = (GeoPoint(a0, o0), GeoPoint(a0, o1), GeoPoint(a1, o1), GeoPoint(a1, o0))
        districts.append(ZoningDistrict((GeoPolygon(ring),), zone))
    return ZoningLayer(tuple(districts))


def _rng(config: SynthConfig, stream: int) -> np.random.Generator:
    return np.random.default_rng([config.seed, stream])


def _raw_layers(config: SynthConfig) -> CityLayers:
    bbox = config.bbox
    lots_xy = _uniform_points(_rng(config, 1), config.n_lots, bbox)
    lots = [VacantLotRaw(f"L{i:05d}", GeoPoint(*xy), Status.AVAILABLE) for i, xy in enumerate(lots_xy)]

    infra = {}
    for s, kind in enumerate(InfraKind):
        seed = config.seed if config.infrastructure_seed is None else config.infrastructure_seed
        pts = _uniform_points(np.random.default_rng([seed, 10 + s]), config.n_per_infrastructure_kind, bbox)
        prefix = kind.value[0].upper() + kind.value[1:3]
        infra[kind] = [InfraPoint(f"{prefix}{i:04d}", GeoPoint(*xy), kind) for i, xy in enumerate(pts)]

    rng = _rng(config, 20)
    crime_xy = _uniform_points(rng, config.n_crime, bbox)
    start = dt.date(config.report_year, 1, 1)
    n_days = (dt.date(config.report_year, 12, 31) - start).days + 1
    days = rng.integers(0, n_days, config.n_crime)
    crime = [
        CrimeIncident(f"C{i:06d}", GeoPoint(*xy), start + dt.timedelta(days=int(d)))
        for i, (xy, d) in enumerate(zip(crime_xy, days))
    ]

    rng = _rng(config, 30)
    prop_xy = _uniform_points(rng, config.n_properties_per_year, bbox)
    base = np.round(rng.lognormal(mean=np.log(150_000), sigma=0.5, size=len(prop_xy)), 2)
    east = (prop_xy[:, 1] - bbox[1]) / (bbox[3] - bbox[1])
    growth = config.price_trend + config.price_gradient * (east - 0.5) + rng.normal(0, 0.02, len(prop_xy))
    later = np.round(base * np.exp(growth), 2)
    y0, y1 = config.assessment_years
    assessments = []
    for i, (xy, v0, v1) in enumerate(zip(prop_xy, base, later)):
        assessments.append(PropertyAssessment(f"P{i:05d}-{y0}", GeoPoint(*xy), y0, float(v0)))
        assessments.append(PropertyAssessment(f"P{i:05d}-{y1}", GeoPoint(*xy), y1, float(v1)))

    return assemble(
        config.name,
        lots,
        infra[InfraKind.LIBRARY],
        infra[InfraKind.PARK],
        infra[InfraKind.SCHOOL],
        infra[InfraKind.TRANSIT_STOP],
        crime,
        assessments,
        _quadrant_zoning(bbox),
    )


def conversion_scores(dataset: ModelingDataset) -> np.ndarray:
    """Density score driving the conversion type: z(vacantDensity) + z(crimeDensity)."""
    d = dataset.matrix(("vacantDensity", "crimeDensity"))
    std = d.std(axis=0)
    z = (d - d.mean(axis=0)) / np.where(std > 0, std, 1.0)
    return z.sum(axis=1)


def generate_city_with_rule(
    config: SynthConfig, reference: PlantedRule | None = None
) -> tuple[CityLayers, PlantedRule, ModelingDataset]:
    """Generate a city and return it with its planted rule and feature table.

    With a ``reference`` rule the city is labelled with the reference's
    standardisation and threshold (and this config's weights), so two cities
    share one labelling function up to the weight change.
    """
    raw = _raw_layers(config)
    unlabeled = build_dataset(raw, config.radius_m)
    if reference is not None:
        rule = replace(reference, weights=dict(config.weights))
    else:
        X = PlantedRule.design(unlabeled)[:, : len(NUMERIC_FEATURES)]
        std = X.std(axis=0)
        rule = PlantedRule(
            dict(config.weights), tuple(X.mean(axis=0)), tuple(np.where(std > 0, std, 1.0)), 0.0
        )
    scores = rule.scores(unlabeled)
    if reference is not None and config.threshold is None:
        threshold = reference.threshold
    elif config.threshold is None:
        threshold = float(np.quantile(scores, 1.0 - config.adopt_fraction))
    else:
        threshold = config.threshold
    rule = replace(rule, threshold=threshold)
    adopt = scores > threshold
    if config.noise > 0:
        flips = _rng(config, 40).random(len(adopt)) < config.noise
        adopt = adopt ^ flips

    conv_score = conversion_scores(unlabeled)
    cut = np.quantile(conv_score[adopt], [1 / 3, 2 / 3]) if adopt.any() else np.zeros(2)
    tercile = np.searchsorted(cut, conv_score, side="right")

    by_id = {}
    for row, a, t in zip(unlabeled.rows, adopt, tercile):
        by_id[row.id] = (Status.ADOPT, CONVERSION_TERCILES[t]) if a else (Status.AVAILABLE, None)
    lots = [
        VacantLotRaw(lot.id, lot.location, *by_id[lot.id])
        for lot in raw.lots
    ]
    layers = replace(raw, lots=tuple(lots))
    labeled = build_dataset(layers, config.radius_m)
    return layers, rule, labeled


def generate_city(config: SynthConfig) -> CityLayers:
    return generate_city_with_rule(config)[0]


def shifted_config(config: SynthConfig, shift: CityShift) -> SynthConfig:
    """Configuration of the partner city.

    Lots, crime and properties are always redrawn from a derived seed. The
    infrastructure layout is kept unless ``infra_scale`` changes it.
    """
    infra_seed = config.seed if config.infrastructure_seed is None else config.infrastructure_seed
    new_seed = int(np.random.SeedSequence([config.seed, 1]).generate_state(1)[0])
    rng = np.random.default_rng([config.seed, 99])
    noise = rng.normal(0.0, 1.0, len(RULE_TERMS))
    weights = {
        t: config.weights.get(t, 0.0) + shift.weight_noise * e for t, e in zip(RULE_TERMS, noise)
    }
    return replace(
        config,
        name=shift.name or f"{config.name}-shifted",
        n_lots=max(1, round(config.n_lots * shift.lot_scale)),
        n_per_infrastructure_kind=max(1, round(config.n_per_infrastructure_kind * shift.infra_scale)),
        n_crime=max(1, round(config.n_crime * shift.crime_scale)),
        price_trend=config.price_trend + shift.price_trend_offset,
        weights=weights,
        seed=new_seed,
        infrastructure_seed=infra_seed if shift.infra_scale == 1.0 else new_seed,
    )


def generate_city_pair(config: SynthConfig, shift: CityShift = CityShift()) -> tuple[CityLayers, CityLayers]:
    """The configured city and a second one drawn from a shifted configuration.

    The second city's seed derives from the first, so a pair is reproducible
    from one seed. The second city is labelled with the first city's
    standardisation and threshold, so with a zero shift both share one
    labelling function and one generating distribution.
    """
    first, second, _ = generate_datasets_pair(config, shift)
    return first, second


def generate_datasets_pair(
    config: SynthConfig, shift: CityShift = CityShift()
) -> tuple[CityLayers, CityLayers, tuple[ModelingDataset, ModelingDataset]]:
    """Like :func:`generate_city_pair`, also returning both feature tables."""
    a_layers, rule, a_data = generate_city_with_rule(config)
    b_layers, _, b_data = generate_city_with_rule(shifted_config(config, shift), reference=rule)
    return a_layers, b_layers, (a_data, b_data)


# ------------------------------------------------------------ config files

_INT_KEYS = {
    "n_lots", "n_per_infrastructure_kind", "n_crime", "n_properties_per_year", "report_year", "seed",
    "infrastructure_seed",
}
_FLOAT_KEYS = {"adopt_fraction", "noise", "price_trend", "price_gradient", "radius_m"}
_SHIFT_KEYS = {f.name for f in fields(CityShift)} - {"name"}


def _parse_section(name: str, section) -> tuple[SynthConfig, str | None, CityShift | None]:
    kw: dict = {"name": name}
    weights = dict(DEFAULT_WEIGHTS)
    shift_kw: dict = {}
    pair_of = None
    for key, raw in section.items():
        try:
            if key in _INT_KEYS:
                kw[key] = int(raw)
            elif key in _FLOAT_KEYS:
                kw[key] = float(raw)
            elif key == "threshold":
                kw[key] = None if raw.strip().lower() in ("", "auto") else float(raw)
            elif key == "bbox":
                kw[key] = tuple(float(v) for v in raw.split(","))
            elif key == "assessment_years":
                kw[key] = tuple(int(v) for v in raw.split(","))
            elif key.startswith("weight."):
                weights[key[len("weight."):]] = float(raw)
            elif key == "pair_of":
                pair_of = raw.strip()
            elif key in _SHIFT_KEYS:
                shift_kw[key] = float(raw)
            else:
                raise ConfigError(f"[{name}] unknown key {key!r}")
        except ValueError as exc:
            raise ConfigError(f"[{name}] bad value for {key!r}: {exc}") from None
    try:
        config = SynthConfig(weights=weights, **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{name}] {exc}") from None
    shift = CityShift(name=name, **shift_kw) if pair_of else None
    if shift_kw and not pair_of:
        raise ConfigError(f"[{name}] shift keys need pair_of")
    return config, pair_of, shift


def read_synth_config(path) -> list[tuple[SynthConfig, str | None, CityShift | None]]:
    """Parse a synthesis config: one ``[section]`` per city.

    Keys mirror :class:`SynthConfig` (``weight.<term>`` sets a rule weight).
    A section with ``pair_of = <other>`` is generated as the shifted partner
    of that city, using the :class:`CityShift` keys it sets.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str  # rule terms are camelCase
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read synth config {path}: {exc}") from None
    entries = [_parse_section(s, parser[s]) for s in parser.sections()]
    if not entries:
        raise ConfigError(f"{path}: no city sections")
    names = {c.name for c, _, _ in entries}
    for c, pair_of, _ in entries:
        if pair_of is not None and pair_of not in names:
            raise ConfigError(f"[{c.name}] pair_of refers to unknown city {pair_of!r}")
    return entries


def synthesize_from_config(path, out_dir) -> list[Path]:
    """Generate every city in a config file into ``out_dir/<name>``.

    Partners are labelled with their base city's rule (see
    :func:`generate_city_pair`).
    """
    from .ingest import write_city

    entries = read_synth_config(path)
    by_name = {c.name: (c, pair_of) for c, pair_of, _ in entries}
    for c, pair_of, _ in entries:
        if pair_of is not None and by_name[pair_of][1] is not None:
            raise ConfigError(f"[{c.name}] pair_of must name a base city, not another partner")
    layers, rules = {}, {}
    for config, pair_of, _ in entries:
        if pair_of is None:
            layers[config.name], rules[config.name], _ = generate_city_with_rule(config)
    for config, pair_of, shift in entries:
        if pair_of is not None:
            partner = shifted_config(by_name[pair_of][0], shift)
            layers[config.name] = generate_city_with_rule(partner, reference=rules[pair_of])[0]
    return [write_city(layers[c.name], Path(out_dir) / c.name) for c, _, _ in entries]
