# %% [markdown]
# # One triple, end to end
#
# Physicians read the medical records that list them, unless they are
# trainees. We build the feature catalog for the single
# (Physician, MedicalRecord, read) triple, grow the tree and read the rule
# off its PERMIT path.

# %%
from rebac_miner.engine import Evaluator, au_matrices
from rebac_miner.features import (
    FeatureLimits,
    build_dataset,
    collapse_equivalent_features,
    drop_constant_features,
    generate_features,
)
from rebac_miner.fixtures import physician_toy
from rebac_miner.model import format_rule
from rebac_miner.tree import build_tree, extract_rules, tree_to_text

fx = physician_toy()
ev = Evaluator(fx.object_model)
triple = ("Physician", "MedicalRecord", "read")
print(len(fx.object_model), "objects,", len(fx.au), "authorizations")

# %% [markdown]
# The catalog holds every condition and constraint the path limits allow,
# cheapest first, with the `id` tests at the very end.

# %%
feats = generate_features(ev, "Physician", "MedicalRecord", FeatureLimits())
for f in feats[:8]:
    print(f.wsc, f)
print("...", len(feats), "features in total")

# %%
ds = build_dataset(ev, au_matrices(ev, fx.au)[triple], triple, feats)
print("vectors:", len(ds), " positives:", int(ds.labels.sum()))
ds = collapse_equivalent_features(drop_constant_features(ds))
print("features after reduction:", len(ds.features))

# %% [markdown]
# Gini picks the membership constraint first; the trainee flag then
# separates the remaining denials.

# %%
tree = build_tree(ds)
print(tree_to_text(tree, ds))
for rule in extract_rules(tree, ds, ev.cm):
    print(format_rule(rule))
