"""Experiment runner: determinism, stage tagging, rankings, report files."""
from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import replace

import pytest

from glancelab.eval_reports import (
    CLASSIFICATION_MODELS,
    REGRESSION_MODELS,
    REPORT_VERSION,
    EvalError,
    ExperimentConfig,
    StageError,
    TooFewModels,
    canonical_json,
    compare_models,
    load_report,
    run_experiment,
    save_report,
)
from glancelab.models import ForestConfig
from glancelab.synthgen import GeneratorSpec

TINY_FOREST = ForestConfig(n_estimators=8, max_depth=5)


def tiny_config(**kw):
    base = dict(
        generator=GeneratorSpec(sessions_per_trip=10, noise_sigma_ms=400),
        n_trips=8, seed=3,
        classification_config=TINY_FOREST,
        regression_config=TINY_FOREST,
        explain_sample=30)
    base.update(kw)
    return ExperimentConfig(**base)


def quiet_run(config):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return run_experiment(config)


@pytest.fixture(scope="module")
def report():
    return quiet_run(tiny_config())


def test_report_structure(report):
    assert report.version == REPORT_VERSION
    assert set(report.models["classification"]) == set(CLASSIFICATION_MODELS)
    assert set(report.models["regression"]) == set(REGRESSION_MODELS)
    assert report.data["n_rows"] == 80
    assert report.data["n_trips"] == 8
    assert set(report.seeds) == {
        "data", "balance", "cv_classification", "cv_regression",
        "fit_classification", "fit_regression"}
    from glancelab.features import FEATURE_NAMES
    for task in ("classification", "regression"):
        block = report.explanations[task]
        assert len(block["importance"]) == 25
        assert sorted(block["ranking"]) == sorted(FEATURE_NAMES)
        force = block["sample_force"]
        total = force["base_value"] + force["residual"] \
            + sum(b["phi"] for b in force["bars"])
        assert total == pytest.approx(force["model_output"], abs=1e-9)


def test_hashes_are_self_consistent(report):
    doc = report.as_dict()
    body = {k: v for k, v in doc.items() if k != "report_hash"}
    expected = hashlib.sha256(
        canonical_json(body).encode("utf-8")).hexdigest()
    assert report.report_hash == expected
    cfg_hash = hashlib.sha256(
        canonical_json(doc["config"]).encode("utf-8")).hexdigest()
    assert report.config_hash == cfg_hash


def test_rerun_is_byte_identical(report):
    again = quiet_run(tiny_config())
    assert again.to_json() == report.to_json()
    assert again.report_hash == report.report_hash


def test_thread_count_does_not_change_the_report(report):
    threaded = quiet_run(tiny_config(n_jobs=4))
    doc_a = report.as_dict()
    doc_b = threaded.as_dict()
    # n_jobs is echoed in the config, so compare everything else
    for key in ("data", "seeds", "models", "model_hashes", "summary_stats",
                "explanations"):
        assert doc_a[key] == doc_b[key], key


def test_different_seed_changes_the_data(report):
    other = quiet_run(tiny_config(seed=4))
    assert other.data["hash"] != report.data["hash"]
    assert other.report_hash != report.report_hash


def test_save_load_round_trip(report, tmp_path):
    p = tmp_path / "report.json"
    save_report(report, p)
    assert load_report(p) == report.as_dict()
    p.write_text(canonical_json({"version": "glancelab-report/9"}))
    with pytest.raises(EvalError, match="version"):
        load_report(p)


def test_plot_data_files(tmp_path):
    out = tmp_path / "plots"
    out.mkdir()
    quiet_run(tiny_config(plot_data_dir=str(out)))
    names = sorted(f.name for f in out.iterdir())
    assert names == [
        "beeswarm_classification.json", "beeswarm_regression.json",
        "dependence_classification.json", "dependence_regression.json",
        "force_classification.json", "force_regression.json"]
    for f in out.iterdir():
        doc = json.loads(f.read_text())
        assert doc


def test_compare_models_orders_each_task(report):
    rows = compare_models(report)
    assert len(rows) == 6
    cls = [r for r in rows if r["task"] == "classification"]
    reg = [r for r in rows if r["task"] == "regression"]
    assert [r["rank"] for r in cls] == [1, 2, 3]
    assert cls[0]["mean"] >= cls[1]["mean"] >= cls[2]["mean"]
    assert reg[0]["mean"] <= reg[1]["mean"] <= reg[2]["mean"]
    assert reg[-1]["model"] == "median_baseline"   # constant predictor last
    # the dict form works too
    assert compare_models(report.as_dict()) == rows


def test_compare_models_breaks_ties_by_name():
    metric = {"metric": "accuracy", "fold_values": [0.8], "mean": 0.8,
              "std": 0.0, "n_folds": 10, "n_repeats": 1}
    doc = {"models": {"classification": {"zeta": dict(metric),
                                         "alpha": dict(metric)}}}
    rows = compare_models(doc)
    assert [r["model"] for r in rows] == ["alpha", "zeta"]


def test_compare_models_needs_two(report):
    doc = {"models": {"regression": {
        "only": {"metric": "mae_ms", "fold_values": [1.0], "mean": 1.0,
                 "std": 0.0, "n_folds": 10, "n_repeats": 1}}}}
    with pytest.raises(TooFewModels):
        compare_models(doc)


# ---------------------------------------------------------------------------
# stage tagging
# ---------------------------------------------------------------------------

def test_generate_stage_is_tagged():
    cfg = tiny_config(generator=GeneratorSpec(alpha_n_ms=10_000.0,
                                              n_range=(2, 2)))
    with pytest.raises(StageError) as err:
        quiet_run(cfg)
    assert err.value.stage == "generate"
    assert str(err.value).startswith("[generate]")


def test_ingest_stage_is_tagged(tmp_path):
    cfg = ExperimentConfig(logs_dir=str(tmp_path),
                           classification_config=TINY_FOREST,
                           regression_config=TINY_FOREST)
    with pytest.raises(StageError) as err:
        quiet_run(cfg)
    assert err.value.stage == "ingest"


def test_train_stage_is_tagged():
    # a fleet that never produces a long glance cannot be balanced
    cfg = tiny_config(generator=GeneratorSpec(
        sessions_per_trip=10, long_bias=-30.0, long_n_coef=0.0))
    with pytest.raises(StageError) as err:
        quiet_run(cfg)
    assert err.value.stage == "train"


# ---------------------------------------------------------------------------
# config validation
# ---------------------------------------------------------------------------

def test_config_requires_exactly_one_source(tmp_path):
    with pytest.raises(ValueError, match="data source"):
        ExperimentConfig()
    with pytest.raises(ValueError, match="data source"):
        ExperimentConfig(logs_dir=str(tmp_path), generator=GeneratorSpec())
    with pytest.raises(ValueError, match="n_trips"):
        tiny_config(n_trips=0)
    with pytest.raises(ValueError, match="explain_sample"):
        tiny_config(explain_sample=0)


def test_config_round_trips_through_dict():
    cfg = tiny_config()
    doc = cfg.as_dict()
    assert doc["generator"]["sessions_per_trip"] == 10
    assert doc["logs_dir"] is None
    assert doc["classification_config"]["n_estimators"] == 8
    assert json.loads(canonical_json(doc)) == doc
