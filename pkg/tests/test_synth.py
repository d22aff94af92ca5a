import numpy as np
import pytest

from conftest import SMALL, write_text
from vacantlot.errors import ConfigError
from vacantlot.evaluation import SplitSpec, evaluate_predictions, stratified_split
from vacantlot.features import CONVERTED_ONLY, build_dataset, task_labels
from vacantlot.ingest import LAYER_FILES, Status, load_city, write_city
from vacantlot.model import SVM, fit_model
from vacantlot.synth import (
    DEFAULT_ADOPT_FRACTION,
    TRANSFER_SHIFT,
    CityShift,
    PlantedRule,
    SynthConfig,
    conversion_scores,
    generate_city,
    generate_city_pair,
    generate_datasets_pair,
    generate_city_with_rule,
    read_synth_config,
    shifted_config,
    synthesize_from_config,
)


def test_deterministic(small_city):
    layers = small_city[0]
    assert generate_city(SynthConfig(name="smallville", seed=11, noise=0.05, **SMALL)) == layers
    assert generate_city(SynthConfig(name="smallville", seed=12, noise=0.05, **SMALL)) != layers


def test_layer_sizes(small_city):
    s = small_city[0].summary()
    assert s["lots"] == SMALL["n_lots"]
    assert s["libraries"] == s["parks"] == s["schools"] == s["transit"] == SMALL["n_per_infrastructure_kind"]
    assert s["crime"] == SMALL["n_crime"]
    assert s["assessments"] == 2 * SMALL["n_properties_per_year"]
    assert s["zoning_districts"] == 4


def test_points_inside_box_and_zoning_covers(small_city):
    layers, _, ds = small_city
    lat0, lon0, lat1, lon1 = SynthConfig().bbox
    for p in layers.lots + layers.crime + layers.libraries:
        assert lat0 <= p.location.lat <= lat1 and lon0 <= p.location.lon <= lon1
    assert not any(r.zone_flag for r in ds.rows)
    assert len({r.features.zone for r in ds.rows}) == 4


def test_noise_free_labels_follow_rule():
    layers, rule, ds = generate_city_with_rule(SynthConfig(seed=3, **SMALL))
    adopt = np.array([r.status is Status.ADOPT for r in ds.rows])
    recomputed = build_dataset(layers)
    np.testing.assert_array_equal(rule.labels(recomputed), adopt)


def test_noise_flips_about_epsilon():
    cfg = SynthConfig(seed=4, n_lots=2000, n_crime=500, n_properties_per_year=300)
    _, rule, ds = generate_city_with_rule(SynthConfig(**{**cfg.__dict__, "noise": 0.1}))
    adopt = np.array([r.status is Status.ADOPT for r in ds.rows])
    flipped = np.mean(rule.labels(ds) != adopt)
    assert 0.07 < flipped < 0.13


def test_adopt_fraction_steered():
    _, _, ds = generate_city_with_rule(SynthConfig(seed=5, n_lots=1907, n_crime=500, n_properties_per_year=300))
    n_adopt = sum(r.status is Status.ADOPT for r in ds.rows)
    assert abs(n_adopt / 1907 - DEFAULT_ADOPT_FRACTION) < 0.002
    assert abs(n_adopt - 887) <= 2


def test_fixed_threshold():
    _, rule, _ = generate_city_with_rule(SynthConfig(seed=5, threshold=0.25, **SMALL))
    assert rule.threshold == 0.25


def test_conversion_terciles(small_city):
    _, _, ds = small_city
    pos, lab = task_labels(ds, CONVERTED_ONLY)
    score = conversion_scores(ds)[pos]
    order = {"community_garden": 0, "qcmos": 1, "urban_farm": 2}
    ranks = np.array([order[v] for v in lab])
    # classes occupy increasing score bands
    for lo, hi in ((0, 1), (1, 2)):
        assert score[ranks == lo].max() <= score[ranks == hi].min()
    counts = np.bincount(ranks, minlength=3)
    assert counts.max() - counts.min() <= 2


def test_round_trip(small_city, tmp_path):
    layers = small_city[0]
    write_city(layers, tmp_path / "c")
    assert load_city(tmp_path / "c", layers.name) == layers


def test_linear_model_recovers_noise_free_rule():
    _, _, ds = generate_city_with_rule(SynthConfig(seed=1))
    X = ds.matrix()
    labels = np.array(task_labels(ds)[1])
    tr, va = stratified_split(labels, SplitSpec(seed=1))
    model = fit_model(SVM, X[tr], labels[tr].tolist(), 1e-4, seed=1)
    rep = evaluate_predictions(labels[va], model.predict(X[va]))
    assert rep.per_class["adopt"].f1 >= 0.98


def test_pair_deterministic_and_shares_rule():
    cfg = SynthConfig(seed=2, **SMALL)
    a1, b1 = generate_city_pair(cfg, TRANSFER_SHIFT)
    a2, b2 = generate_city_pair(cfg, TRANSFER_SHIFT)
    assert (a1, b1) == (a2, b2)
    assert a1 == generate_city(cfg)
    assert len(b1.libraries) == SMALL["n_per_infrastructure_kind"] // 2


def test_zero_shift_keeps_infrastructure_only():
    cfg = SynthConfig(seed=2, **SMALL)
    a, b = generate_city_pair(cfg)
    assert a.libraries == b.libraries and a.transit == b.transit
    assert a.lots != b.lots and a.crime != b.crime
    assert CityShift().is_zero and not TRANSFER_SHIFT.is_zero


def test_partner_labelled_with_first_city_rule():
    cfg = SynthConfig(seed=6, **SMALL)
    shift = CityShift(weight_noise=0.3)
    _, _, (a, b) = generate_datasets_pair(cfg, shift)
    _, rule, _ = generate_city_with_rule(cfg)
    partner = shifted_config(cfg, shift)
    shared = PlantedRule(partner.weights, rule.mean, rule.std, rule.threshold)
    adopt = np.array([r.status is Status.ADOPT for r in b.rows])
    np.testing.assert_array_equal(shared.labels(b), adopt)


def test_shifted_config():
    cfg = SynthConfig(seed=8)
    s = shifted_config(cfg, CityShift(infra_scale=0.5, crime_scale=2.0, lot_scale=0.9, price_trend_offset=0.1,
                                      name="other"))
    assert s.name == "other"
    assert (s.n_per_infrastructure_kind, s.n_crime, s.n_lots) == (3, 20000, 1800)
    assert s.price_trend == pytest.approx(0.15)
    assert s.seed != cfg.seed and s.infrastructure_seed == s.seed
    assert s.weights == cfg.weights  # no weight noise requested


@pytest.mark.parametrize("kw", [dict(n_lots=0), dict(noise=0.5), dict(bbox=(39.3, -76.6, 39.2, -76.5)),
                                dict(weights={"height": 1.0}), dict(adopt_fraction=1.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SynthConfig(**kw)


CONFIG = """
[north]
n_lots = 60
n_per_infrastructure_kind = 3
n_crime = 200
n_properties_per_year = 100
noise = 0.05
seed = 4
weight.libDist = -2.0

[south]
pair_of = north
infra_scale = 0.5
weight_noise = 0.2
"""


def test_config_file(tmp_path):
    path = write_text(tmp_path / "synth.ini", CONFIG)
    entries = read_synth_config(path)
    north, south = entries
    assert north[0].weights["libDist"] == -2.0 and north[1] is None
    assert south[1] == "north" and south[2].infra_scale == 0.5
    dirs = synthesize_from_config(path, tmp_path / "out")
    assert [d.name for d in dirs] == ["north", "south"]
    for d in dirs:
        assert sorted(p.name for p in d.iterdir()) == sorted(LAYER_FILES.values())
    assert load_city(dirs[0]).summary()["lots"] == 60
    assert load_city(dirs[1]).summary()["libraries"] == 2
    again = synthesize_from_config(path, tmp_path / "again")
    for d1, d2 in zip(dirs, again):
        for name in LAYER_FILES.values():
            assert (d1 / name).read_bytes() == (d2 / name).read_bytes()


@pytest.mark.parametrize("text", [
    "[a]\nn_lots = many\n",
    "[a]\ncolour = red\n",
    "[a]\ninfra_scale = 0.5\n",
    "[a]\npair_of = nowhere\n",
    "[a]\nnoise = 0.7\n",
    "",
    "not an ini file",
])
def test_config_errors(tmp_path, text):
    path = write_text(tmp_path / "bad.ini", text)
    with pytest.raises(ConfigError):
        read_synth_config(path)
