"""Within-city modelling: adopt vs available, feature subsets and conversion type.

Run from the repository root:  python demos/02_within_city.py
"""
# %%
from vacantlot.experiments import run_conversion_type, run_feature_subsets, run_within_city_binary
from vacantlot.features import CONVERTED_ONLY
from vacantlot.model import CLASSIFIERS
from vacantlot.synth import SynthConfig, generate_city_with_rule

SEED = 0

# %%
_, rule, dataset = generate_city_with_rule(SynthConfig(noise=0.05, seed=SEED))
print(f"{len(dataset)} lots; planted weights {rule.weights}")

# %% [markdown]
# Every classifier is tuned by 5-fold CV on the 60% training split, refit on
# the whole split and scored once on the held-out 40%.

# %%
reports = run_within_city_binary(dataset, CLASSIFIERS, seed=SEED)
print(f"\n{'classifier':>10} {'adopt F1':>9} {'accuracy':>9}  tuned")
for kind, rep in reports.items():
    meta = rep.metadata
    print(f"{kind:>10} {rep.per_class['adopt'].f1:9.3f} {rep.accuracy:9.3f}  "
          f"{meta['tuned_parameter']}={meta['chosen_value']}")

# %% which feature groups carry the signal?
print()
for subset, rep in run_feature_subsets(dataset, seed=SEED):
    print(f"{', '.join(subset):>70}  adopt F1 {rep.per_class['adopt'].f1:.3f}")

# %% among converted lots, predict what they became
print()
for kind, rep in run_conversion_type(dataset, ("rf", "knn"), seed=SEED, mode=CONVERTED_ONLY).items():
    cells = ", ".join(f"{c} {m.f1:.2f}" for c, m in rep.per_class.items())
    print(f"{kind:>4} macro F1 {rep.macro_f1:.3f}  ({cells})")
