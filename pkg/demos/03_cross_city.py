"""Train on one city, predict in another.

The partner city shares the labelling rule's form but has half the
infrastructure and perturbed weights, so a model carried over unchanged
should suffer, and a little local data should win most of it back.

Run from the repository root:  python demos/03_cross_city.py
"""
# %%
from vacantlot.experiments import run_cross_city, run_within_city_binary
from vacantlot.synth import TRANSFER_SHIFT, SynthConfig, generate_city_with_rule, shifted_config

SEED = 1
CLASSIFIERS = ("rf", "knn")

# %%
config = SynthConfig(name="harbor", noise=0.05, seed=SEED)
_, rule, home = generate_city_with_rule(config)
_, _, other = generate_city_with_rule(shifted_config(config, TRANSFER_SHIFT), reference=rule)
print(f"{home.city}: {len(home)} lots    {other.city}: {len(other)} lots")

# %%
runs = {
    "within": run_within_city_binary(home, CLASSIFIERS, seed=SEED),
    "pure transfer": run_cross_city(other, home, CLASSIFIERS, seed=SEED),
    "mixed": run_cross_city(home, other, CLASSIFIERS, seed=SEED, source_fraction=0.25, target_fraction=1.0),
}

# %%
for label, reports in runs.items():
    meta = reports["rf"].metadata
    setting = meta.get("training_set", f"{home.city}: 60%")
    print(f"\n{label} ({setting})")
    for kind, rep in reports.items():
        print(f"  {kind:>4} adopt F1 {rep.per_class['adopt'].f1:.3f}")
