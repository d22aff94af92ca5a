import csv
import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import SMALL, write_text
from vacantlot.errors import ConfigError, InvalidFractions, MissingConversionLabels
from vacantlot.experiments import (
    FEATURE_SUBSETS,
    cross_city_split,
    read_experiment_config,
    run_config,
    run_conversion_type,
    run_cross_city,
    run_feature_subsets,
    run_within_city_binary,
    training_set_label,
)
from vacantlot.features import ALL_CLASSES, CONVERTED_ONLY, ModelingDataset, write_features
from vacantlot.ingest import write_city
from vacantlot.model import KNN, NAIVE_BAYES, RANDOM_FOREST, Hyperparams, KnnParams, RandomForestParams
from vacantlot.synth import TRANSFER_SHIFT, SynthConfig, generate_datasets_pair

FAST = Hyperparams(rf=RandomForestParams(n_trees_grid=(2, 8)), knn=KnnParams(k_grid=(1, 3)))


@pytest.fixture(scope="module")
def pair():
    cfg = SynthConfig(name="north", seed=21, noise=0.05, **{**SMALL, "n_lots": 200})
    layers_a, layers_b, (a, b) = generate_datasets_pair(cfg, TRANSFER_SHIFT)
    return layers_a, layers_b, a, ModelingDataset("south", b.rows, b.radius_m)


def test_training_set_label():
    assert training_set_label("Baltimore", 1.0, "Philadelphia", 0.25) == "Baltimore: 100% / Philadelphia: 25%"
    assert training_set_label("Baltimore", 0.5, "Philadelphia", 1.0) == "Baltimore: 50% / Philadelphia: 100%"
    assert training_set_label("Philadelphia", 1.0, "Baltimore", 0.0) == "Philadelphia: 100%"


def test_within_city(pair):
    ds = pair[2]
    reports = run_within_city_binary(ds, (RANDOM_FOREST, KNN), seed=3, hyper=FAST, k=3)
    assert list(reports) == [RANDOM_FOREST, KNN]
    rep = reports[KNN]
    assert set(rep.per_class) == {"adopt", "available"}
    assert rep.metadata["tuned_parameter"] == "k"
    assert [r["value"] for r in rep.metadata["cv"]] == [1, 3]
    assert rep.metadata["n_train"] + rep.metadata["n_eval"] == len(ds)
    assert rep.metadata["n_eval"] == rep.confusion.total
    again = run_within_city_binary(ds, (RANDOM_FOREST, KNN), seed=3, hyper=FAST, k=3)
    assert {k: r.to_json() for k, r in again.items()} == {k: r.to_json() for k, r in reports.items()}


def test_feature_subsets(pair):
    rows = run_feature_subsets(pair[2], seed=1)
    assert [s for s, _ in rows] == [tuple(s) for s in FEATURE_SUBSETS]
    for subset, rep in rows:
        assert rep.metadata["features"] == list(subset)
        assert rep.metadata["chosen_value"] == 8


def test_density_subset_wins_when_only_densities_matter():
    weights = {k: 0.0 for k in SynthConfig().weights}
    weights.update(vacantDensity=1.0, crimeDensity=-1.0)
    from vacantlot.synth import generate_city_with_rule
    _, _, ds = generate_city_with_rule(SynthConfig(seed=2, weights=weights, n_lots=600, n_crime=3000,
                                                   n_properties_per_year=300))
    scores = {s: rep.per_class["adopt"].f1 for s, rep in run_feature_subsets(ds, seed=2)}
    assert scores[("vacantDensity", "crimeDensity")] > scores[("transitDist", "zone")] + 0.1


@pytest.mark.parametrize("mode,n_classes", [(CONVERTED_ONLY, 3), (ALL_CLASSES, 4)])
def test_conversion_modes(pair, mode, n_classes):
    rep = run_conversion_type(pair[2], (KNN,), seed=0, mode=mode, hyper=FAST, k=3)[KNN]
    assert len(rep.per_class) == n_classes
    assert rep.metadata["mode"] == mode


def test_conversion_needs_labels(pair):
    south = pair[3]
    stripped = ModelingDataset("south", tuple(r.__class__(r.id, r.location, r.features, r.status)
                                              for r in south.rows))
    with pytest.raises(MissingConversionLabels):
        run_conversion_type(stripped, (KNN,), seed=0)
    with pytest.raises(ValueError):
        run_conversion_type(pair[2], (KNN,), mode="everything")


@pytest.mark.parametrize("fs,ft", [(1.0, 1.0), (0.5, 0.5), (1.2, 0.0), (1.0, -0.1)])
def test_invalid_fractions(fs, ft):
    with pytest.raises(InvalidFractions):
        cross_city_split(["a", "b"] * 10, ["a", "b"] * 10, fs, ft)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from([0.0, 0.2, 0.25, 0.5, 0.75, 0.9]), st.booleans(), st.integers(0, 10_000))
def test_cross_city_sets_disjoint(partial, source_partial, seed):
    src = ["adopt", "available"] * 30 + ["adopt"] * 7
    tgt = ["adopt", "available"] * 25
    fs, ft = (partial, 1.0) if source_partial else (1.0, partial)
    plan = cross_city_split(src, tgt, fs, ft, seed)
    if plan.eval_city == "source":
        assert not set(plan.eval_rows) & set(plan.source_train)
        assert len(plan.target_train) == len(tgt)
        assert sorted([*plan.eval_rows, *plan.source_train]) == list(range(len(src)))
    else:
        assert not set(plan.eval_rows) & set(plan.target_train)
        assert len(plan.source_train) == len(src)
        assert sorted([*plan.eval_rows, *plan.target_train]) == list(range(len(tgt)))


def test_pure_transfer_evaluates_whole_target(pair):
    _, _, north, south = pair
    rep = run_cross_city(north, south, (RANDOM_FOREST,), seed=0, hyper=FAST, k=3)[RANDOM_FOREST]
    assert rep.confusion.total == len(south)
    assert rep.metadata["n_train"] == len(north)
    assert rep.metadata["training_set"] == "north: 100%"
    assert rep.metadata["evaluation_set"] == "south (held out)"


def test_mixed_training(pair):
    _, _, north, south = pair
    rep = run_cross_city(north, south, (KNN,), seed=0, source_fraction=0.25, target_fraction=1.0,
                         hyper=FAST, k=3)[KNN]
    n_kept = rep.metadata["n_train"] - len(south)
    assert rep.confusion.total == len(north) - n_kept
    assert abs(n_kept - 0.25 * len(north)) <= 2
    assert rep.metadata["training_set"] == "north: 25% / south: 100%"


# ------------------------------------------------------------ config files


@pytest.fixture(scope="module")
def workspace(pair, tmp_path_factory):
    root = tmp_path_factory.mktemp("exp")
    layers_a, layers_b, north, _ = pair
    write_city(layers_a, root / "north")
    write_city(layers_b, root / "south")
    write_features(north, root / "north.csv")
    write_text(root / "exp.ini", """
[DEFAULT]
rf_trees = 2, 8
knn_k = 1, 3
folds = 3

[north_subsets]
experiment = feature_subsets
city = north.csv

[north_binary]
experiment = within_city_binary
city = north
classifiers = rf, nb

[north_types]
experiment = conversion_type
city = north.csv
classifiers = knn
mode = all

[mixed]
experiment = cross_city
source = north
target = south
source_fraction = 1.0
target_fraction = 0.25
""")
    return root


def test_read_config(workspace):
    configs = read_experiment_config(workspace / "exp.ini")
    assert [c.name for c in configs] == ["north_subsets", "north_binary", "north_types", "mixed"]
    assert configs[1].classifiers == (RANDOM_FOREST, NAIVE_BAYES)
    assert configs[3].classifiers == (RANDOM_FOREST, KNN)
    assert configs[0].hyper.rf.n_trees_grid == (2, 8)
    assert configs[2].mode == ALL_CLASSES
    assert all(c.seed == 9 for c in read_experiment_config(workspace / "exp.ini", seed=9))


def test_run_config_outputs(workspace, tmp_path):
    cells = run_config(workspace / "exp.ini", tmp_path / "r", seed=5)
    files = sorted(p.name for p in (tmp_path / "r").iterdir())
    assert "summary.csv" in files and len(files) == len(cells) + 1
    doc = json.loads((tmp_path / "r" / files[0]).read_text())
    assert doc["metadata"]["seed"] == 5
    with open(tmp_path / "r" / "summary.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    settings_ = {r["setting"] for r in rows if r["experiment"] == "mixed"}
    assert settings_ == {"north: 100% / south: 25%"}
    assert {r["class"] for r in rows if r["experiment"] == "north_binary"} == {"adopt", "available",
                                                                              "overall (mean)"}


def test_run_config_deterministic_with_threads(workspace, tmp_path):
    run_config(workspace / "exp.ini", tmp_path / "a", seed=2)
    run_config(workspace / "exp.ini", tmp_path / "b", seed=2, n_jobs=4)
    names = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "b").iterdir())
    for n in names:
        assert (tmp_path / "a" / n).read_bytes() == (tmp_path / "b" / n).read_bytes()


@pytest.mark.parametrize("body", [
    "[x]\nexperiment = sorcery\ncity = north.csv\n",
    "[x]\nexperiment = within_city_binary\n",
    "[x]\nexperiment = within_city_binary\ncity = north.csv\nclassifiers = rf, gbm\n",
    "[x]\nexperiment = cross_city\nsource = north\ntarget = north\n",
    "[x]\nexperiment = cross_city\nsource = north\ntarget = south\nsource_fraction = 2\n",
    "[x]\nexperiment = within_city_binary\ncity = north.csv\nbanana = 1\n",
    "[x]\nexperiment = within_city_binary\ncity = north.csv\nseed = one\n",
    "",
])
def test_config_errors(workspace, body):
    path = write_text(workspace / "bad.ini", body)
    with pytest.raises(ConfigError):
        read_experiment_config(path)
