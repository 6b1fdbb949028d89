"""
Explaining the demand predictions
=================================

Per-prediction attributions from the exact tree algorithm, checked against
the exhaustive coalition definition, then the dataset-level views: force
breakdown for one engagement, global importance ranking, beeswarm rows,
and a dependence slice colored by the strongest interaction partner.
"""
import numpy as np

from glancelab import features as feat
from glancelab import models as mdl
from glancelab import synthgen as sg
from glancelab.segmentation import assemble_engagements
from glancelab.shap_engine import (beeswarm_data, brute_force_shap,
                                   dependence_data, explain_dataset,
                                   force_data, tree_shap)

# ---------------------------------------------------------------------------
# 1. A fleet and a trained regressor (TGD in milliseconds).
# ---------------------------------------------------------------------------
spec = sg.GeneratorSpec(sessions_per_trip=20, noise_sigma_ms=500)
rows = []
for trip, _truth in sg.generate_trips(spec, n_trips=50, seed=6):
    engagements, _ = assemble_engagements(trip)
    rows.extend(feat.label_engagement(e) for e in engagements)
dataset = feat.filter_dataset(rows)
X, y = dataset.X(), dataset.y_tgd()

forest = mdl.fit_forest(
    X[:800], y[:800], mdl.TASK_REGRESSION,
    mdl.ForestConfig(n_estimators=30, max_depth=12, min_samples_leaf=8,
                     seed=1),
    feature_names=feat.FEATURE_NAMES)

# ---------------------------------------------------------------------------
# 2. One engagement, fully attributed. The contributions plus the base value
#    reconstruct the prediction exactly -- that identity is enforced at
#    construction time, not just tested.
# ---------------------------------------------------------------------------
x = X[900]
expl = tree_shap(forest, x)
print(f"prediction {expl.model_output:.0f} ms = base {expl.base_value:.0f} ms "
      f"+ contributions {np.sum(expl.phi):+.0f} ms")

print("\nforce breakdown (top 6):")
for bar in force_data(expl, top_k=6).bars:
    print(f"  {bar.feature:>12} = {bar.value:>6g}   phi = {bar.phi:+8.1f} ms")

# ---------------------------------------------------------------------------
# 3. The fast path is exact, not approximate: same numbers as summing over
#    every feature coalition (2^M subsets).
# ---------------------------------------------------------------------------
small = mdl.fit_forest(
    X[:800, :12], y[:800], mdl.TASK_REGRESSION,
    mdl.ForestConfig(n_estimators=10, max_depth=4, seed=2))
gap = np.max(np.abs(tree_shap(small, x[:12]).phi
                    - brute_force_shap(small, x[:12]).phi))
print(f"\nmax |tree_shap - brute_force| on a 12-feature forest: {gap:.2e}")

# ---------------------------------------------------------------------------
# 4. Global views over an explained sample.
# ---------------------------------------------------------------------------
summary = explain_dataset(forest, X[800:1000])
print(f"\nglobal importance over {summary.phi_matrix.shape[0]} engagements:")
for rank, idx in enumerate(summary.ranking[:6], start=1):
    print(f"  {rank}. {summary.feature_names[idx]:>12} "
          f"mean|phi| = {summary.importance[idx]:7.1f} ms")

rows_ = beeswarm_data(summary, top_k=3)
print(f"\nbeeswarm carries per-instance phi for the top features: "
      f"{[r.feature for r in rows_]}")

dep = dependence_data(summary, "N")
print(f"dependence slice for N: {len(dep.values)} points, colored by "
      f"strongest interaction partner {dep.color_feature!r}")
