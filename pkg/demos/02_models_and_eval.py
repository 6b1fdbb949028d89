"""
Training and evaluating the task models
=======================================

A small synthetic fleet, the dataset protocol (filter + balance), repeated
and stratified cross-validation against the reference baselines, and a
random hyperparameter search. Finishes with a self-describing experiment
report whose hash pins the whole run.
"""
import warnings

import numpy as np

from glancelab import features as feat
from glancelab import models as mdl
from glancelab import synthgen as sg
from glancelab.eval_reports import ExperimentConfig, compare_models, run_experiment
from glancelab.segmentation import assemble_engagements

# ---------------------------------------------------------------------------
# 1. Synthesize a fleet and run it through the real pipeline.
# ---------------------------------------------------------------------------
spec = sg.GeneratorSpec(sessions_per_trip=20, noise_sigma_ms=600)
rows = []
for trip, _truth in sg.generate_trips(spec, n_trips=60, seed=2):
    engagements, _ = assemble_engagements(trip)
    rows.extend(feat.label_engagement(e) for e in engagements)

dataset = feat.filter_dataset(rows)
print(f"{len(dataset)} engagements kept; drops by reason: "
      f"{dataset.provenance}")

balanced = feat.balance_undersample(dataset, seed=7)
y = balanced.y_long()
print(f"balanced for classification: {int(y.sum())} long / "
      f"{int(len(y) - y.sum())} short")

# ---------------------------------------------------------------------------
# 2. Cross-validate the classifier against a coin flip. Stratified 10-fold
#    keeps each fold's class mix within one row of 50/50.
# ---------------------------------------------------------------------------
forest_config = mdl.ForestConfig(n_estimators=30, max_depth=10, seed=1)
X_bal = balanced.X()

cls_report = mdl.cross_validate(
    X_bal, y, mdl.forest_fit_function(mdl.TASK_CLASSIFICATION, forest_config),
    mdl.TASK_CLASSIFICATION, mdl.STRATIFIED_10_FOLD, seed=3)
coin_report = mdl.cross_validate(
    X_bal, y,
    lambda X_tr, y_tr, fold_seed: mdl.baseline_predict(
        mdl.TASK_CLASSIFICATION, seed=fold_seed),
    mdl.TASK_CLASSIFICATION, mdl.STRATIFIED_10_FOLD, seed=3)
print(f"\nclassification accuracy: forest {cls_report.mean:.3f} "
      f"+/- {cls_report.std:.3f}, random baseline {coin_report.mean:.3f}")

# ---------------------------------------------------------------------------
# 3. Same protocol for the regressor, MAE in milliseconds, against the
#    training-median constant.
# ---------------------------------------------------------------------------
X_all, y_tgd = dataset.X(), dataset.y_tgd()
reg_config = mdl.ForestConfig(n_estimators=30, max_depth=12,
                              min_samples_leaf=8, seed=1)
reg_report = mdl.cross_validate(
    X_all, y_tgd, mdl.forest_fit_function(mdl.TASK_REGRESSION, reg_config),
    mdl.TASK_REGRESSION, mdl.REPEATED_10_FOLD, seed=3, n_repeats=1)
median_report = mdl.cross_validate(
    X_all, y_tgd,
    lambda X_tr, y_tr, fold_seed: mdl.baseline_predict(
        mdl.TASK_REGRESSION, y_tr),
    mdl.TASK_REGRESSION, mdl.REPEATED_10_FOLD, seed=3, n_repeats=1)
print(f"regression MAE: forest {reg_report.mean:.0f} ms, "
      f"median baseline {median_report.mean:.0f} ms")

# ---------------------------------------------------------------------------
# 4. Random search: sample configs, score each by CV, keep the best. The
#    trial list comes back too, so the choice is auditable.
# ---------------------------------------------------------------------------
space = {"n_estimators": (10, 20, 30), "max_depth": (6, 10, 14),
         "min_samples_leaf": (2, 8)}
result = mdl.random_search(X_bal, y, mdl.TASK_CLASSIFICATION, space=space,
                           budget=6, seed=9, n_repeats=1)
print(f"\nsearch over {len(result.trials)} draws, best accuracy "
      f"{result.best_score:.3f} with n_estimators="
      f"{result.best_config.n_estimators}, "
      f"max_depth={result.best_config.max_depth}, "
      f"min_samples_leaf={result.best_config.min_samples_leaf}")

# ---------------------------------------------------------------------------
# 5. Or run the whole protocol in one call and get a hashed report.
# ---------------------------------------------------------------------------
config = ExperimentConfig(
    generator=sg.GeneratorSpec(sessions_per_trip=10, noise_sigma_ms=500),
    n_trips=12, seed=4,
    classification_config=mdl.ForestConfig(n_estimators=20, max_depth=8),
    regression_config=mdl.ForestConfig(n_estimators=20, max_depth=10),
    explain_sample=40)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")
    report = run_experiment(config)

print(f"\nexperiment report {report.report_hash[:16]}..., "
      f"{report.data['n_rows']} rows")
print(f"{'model':>24}  {'metric':>8}  {'mean':>8}")
for row in compare_models(report):
    print(f"{row['model']:>24}  {row['metric']:>8}  {row['mean']:>8.2f}")
