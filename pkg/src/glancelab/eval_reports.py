"""End-to-end experiment orchestration and machine-readable reports.

`run_experiment` drives ingest (or synthesis) → sessionization → labeling →
cross-validated training for both tasks → global explanations, and returns an
`ExperimentReport` whose canonical JSON form is a pure function of the input
data, the configuration, and the seed — no timestamps, no environment
leakage. `report.report_hash` therefore certifies a full reproduction.

Stage tagging: any error raised by a pipeline module is re-raised as
`StageError` with the failing stage's name prefixed, so callers (and the CLI)
can say *where* a run died without losing the original exception.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import features as feat
from . import models as mdl
from . import shap_engine as shap
from .features import Dataset, FEATURE_NAMES, dataset_to_text
from .models import (
    CLASSIFICATION_PRESET,
    REGRESSION_PRESET,
    REPEATED_10_FOLD,
    STRATIFIED_10_FOLD,
    TASK_CLASSIFICATION,
    TASK_REGRESSION,
    ForestConfig,
    MetricsReport,
)
from .segmentation import (
    DEFAULT_BUFFER_MS,
    DEFAULT_MAX_GAP_MS,
    assemble_engagements,
)
from .synthgen import GeneratorSpec, generate_trips
from .telemetry import TripLog, ingest_trip

REPORT_VERSION = "glancelab-report/1"

CLASSIFICATION_MODELS = ("random_forest", "logistic_regression",
                         "random_baseline")
REGRESSION_MODELS = ("random_forest", "linear_regression", "median_baseline")


class EvalError(Exception):
    pass


class StageError(EvalError):
    """A pipeline stage failed; `.stage` names it, `__cause__` is original."""

    def __init__(self, stage: str, original: BaseException):
        super().__init__(f"[{stage}] {type(original).__name__}: {original}")
        self.stage = stage


class TooFewModels(EvalError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a data source plus training/evaluation settings.

    Exactly one of `logs_dir` (a directory of .jsonl trip logs) or
    `generator` (a synthetic fleet) must be set.
    """

    logs_dir: str | None = None
    generator: GeneratorSpec | None = None
    n_trips: int = 20
    seed: int = 0
    classification_config: ForestConfig = field(
        default_factory=lambda: CLASSIFICATION_PRESET)
    regression_config: ForestConfig = field(
        default_factory=lambda: REGRESSION_PRESET)
    n_folds: int = 10
    n_repeats: int | None = None      # None = scheme default
    max_gap_ms: int = DEFAULT_MAX_GAP_MS
    buffer_ms: int = DEFAULT_BUFFER_MS
    n_cap: int = feat.N_CAP
    full_stop_kmh: float = feat.FULL_STOP_KMH
    explain_sample: int = 200
    plot_data_dir: str | None = None
    n_jobs: int = 1

    def __post_init__(self):
        if (self.logs_dir is None) == (self.generator is None):
            raise ValueError(
                "config needs exactly one data source: logs_dir or generator")
        if self.generator is not None and self.n_trips < 1:
            raise ValueError("generator source needs n_trips >= 1")
        if self.explain_sample < 1:
            raise ValueError("explain_sample must be >= 1")

    def as_dict(self) -> dict:
        d = {
            "logs_dir": self.logs_dir,
            "generator": None if self.generator is None
            else _generator_dict(self.generator),
            "n_trips": self.n_trips,
            "seed": self.seed,
            "classification_config": _config_dict(self.classification_config),
            "regression_config": _config_dict(self.regression_config),
            "n_folds": self.n_folds,
            "n_repeats": self.n_repeats,
            "max_gap_ms": self.max_gap_ms,
            "buffer_ms": self.buffer_ms,
            "n_cap": self.n_cap,
            "full_stop_kmh": self.full_stop_kmh,
            "explain_sample": self.explain_sample,
            "n_jobs": self.n_jobs,
        }
        return d


def _config_dict(cfg: ForestConfig) -> dict:
    return {
        "n_estimators": cfg.n_estimators,
        "max_depth": cfg.max_depth,
        "min_samples_split": cfg.min_samples_split,
        "min_samples_leaf": cfg.min_samples_leaf,
        "bootstrap": cfg.bootstrap,
        "max_features": cfg.max_features,
        "seed": cfg.seed,
    }


def _generator_dict(spec: GeneratorSpec) -> dict:
    d = {}
    for name in spec.__dataclass_fields__:
        v = getattr(spec, name)
        if isinstance(v, tuple):
            v = [list(x) if isinstance(x, tuple) else x for x in v]
        d[name] = v
    return d


@dataclass(frozen=True)
class ExperimentReport:
    """Everything a reproduction needs, as plain JSON-ready values."""

    version: str
    data: dict           # hash, row counts, provenance
    config: dict         # ExperimentConfig echo
    config_hash: str
    seeds: dict          # derived per-purpose seeds
    models: dict         # task -> model name -> MetricsReport dict
    model_hashes: dict   # task -> final forest hash
    summary_stats: dict  # per-feature distribution stats
    explanations: dict   # per-task importance/ranking + sample force data
    report_hash: str

    def as_dict(self) -> dict:
        return {
            "version": self.version,
            "data": self.data,
            "config": self.config,
            "config_hash": self.config_hash,
            "seeds": self.seeds,
            "models": self.models,
            "model_hashes": self.model_hashes,
            "summary_stats": self.summary_stats,
            "explanations": self.explanations,
            "report_hash": self.report_hash,
        }

    def to_json(self) -> str:
        return canonical_json(self.as_dict())


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def _sha256(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_report(report: ExperimentReport, path: str | Path) -> None:
    Path(path).write_text(report.to_json(), encoding="utf-8")


def load_report(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != REPORT_VERSION:
        raise EvalError(f"unsupported report version {doc.get('version')!r}")
    return doc


class _Stage:
    """Context manager tagging escaped exceptions with the stage name."""

    def __init__(self, name: str):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, (EvalError,
                                                    KeyboardInterrupt)):
            raise StageError(self.name, exc) from exc
        return False


def build_dataset(config: ExperimentConfig, data_seed: int
                  ) -> tuple[Dataset, dict]:
    """Ingest or synthesize trips, sessionize, label, and filter rows.

    Returns the dataset plus bookkeeping counts (trips, engagements kept and
    dropped per rule).
    """
    trips: list[TripLog] = []
    if config.logs_dir is not None:
        with _Stage("ingest"):
            paths = sorted(Path(config.logs_dir).glob("*.jsonl"))
            if not paths:
                raise FileNotFoundError(
                    f"no .jsonl trip logs under {config.logs_dir}")
            trips = [ingest_trip(p) for p in paths]
    else:
        with _Stage("generate"):
            trips = [t for t, _ in generate_trips(
                config.generator, config.n_trips, data_seed)]

    rows = []
    drop_totals: dict[str, int] = {}
    with _Stage("segment"):
        engagement_lists = []
        for trip in trips:
            engagements, drops = assemble_engagements(
                trip, config.max_gap_ms, config.buffer_ms)
            engagement_lists.append(engagements)
            for k, v in drops.as_dict().items():
                if k != "kept":
                    drop_totals[k] = drop_totals.get(k, 0) + v
    with _Stage("featurize"):
        for engagements in engagement_lists:
            rows.extend(feat.label_engagement(s) for s in engagements)
        ds = feat.filter_dataset(rows, config.n_cap, config.full_stop_kmh)
    counts = {
        "n_trips": len(trips),
        "n_engagements": len(rows),
        "n_rows": len(ds),
        "drops": {**drop_totals, **ds.provenance},
    }
    return ds, counts


def _evaluate_classification(ds: Dataset, config: ExperimentConfig,
                             balance_seed: int, cv_seed: int, fit_seed: int):
    balanced = feat.balance_undersample(ds, balance_seed)
    X, y = balanced.X(), balanced.y_long()
    reports: dict[str, MetricsReport] = {}
    reports["random_forest"] = mdl.cross_validate(
        X, y,
        mdl.forest_fit_function(TASK_CLASSIFICATION,
                                config.classification_config,
                                FEATURE_NAMES, config.n_jobs),
        TASK_CLASSIFICATION, STRATIFIED_10_FOLD, seed=cv_seed,
        n_folds=config.n_folds, n_repeats=config.n_repeats)
    reports["logistic_regression"] = mdl.cross_validate(
        X, y, lambda Xt, yt, fs: mdl.fit_logistic(Xt, yt),
        TASK_CLASSIFICATION, STRATIFIED_10_FOLD, seed=cv_seed,
        n_folds=config.n_folds, n_repeats=config.n_repeats)
    reports["random_baseline"] = mdl.cross_validate(
        X, y, lambda Xt, yt, fs: mdl.baseline_predict(
            TASK_CLASSIFICATION, yt, seed=fs),
        TASK_CLASSIFICATION, STRATIFIED_10_FOLD, seed=cv_seed,
        n_folds=config.n_folds, n_repeats=config.n_repeats)
    final = mdl.fit_forest(
        X, y, TASK_CLASSIFICATION,
        replace(config.classification_config, seed=fit_seed),
        FEATURE_NAMES, config.n_jobs)
    return reports, final, X


def _evaluate_regression(ds: Dataset, config: ExperimentConfig,
                         cv_seed: int, fit_seed: int):
    X, y = ds.X(), ds.y_tgd()
    reports: dict[str, MetricsReport] = {}
    reports["random_forest"] = mdl.cross_validate(
        X, y,
        mdl.forest_fit_function(TASK_REGRESSION, config.regression_config,
                                FEATURE_NAMES, config.n_jobs),
        TASK_REGRESSION, REPEATED_10_FOLD, seed=cv_seed,
        n_folds=config.n_folds, n_repeats=config.n_repeats)
    reports["linear_regression"] = mdl.cross_validate(
        X, y, lambda Xt, yt, fs: mdl.fit_linear(Xt, yt),
        TASK_REGRESSION, REPEATED_10_FOLD, seed=cv_seed,
        n_folds=config.n_folds, n_repeats=config.n_repeats)
    reports["median_baseline"] = mdl.cross_validate(
        X, y, lambda Xt, yt, fs: mdl.baseline_predict(TASK_REGRESSION, yt),
        TASK_REGRESSION, REPEATED_10_FOLD, seed=cv_seed,
        n_folds=config.n_folds, n_repeats=config.n_repeats)
    final = mdl.fit_forest(
        X, y, TASK_REGRESSION,
        replace(config.regression_config, seed=fit_seed),
        FEATURE_NAMES, config.n_jobs)
    return reports, final, X


def _explanation_block(forest, X: np.ndarray, sample: int):
    summary = shap.explain_dataset(forest, X[:sample])
    importance = summary.importance
    force = shap.force_data(shap.tree_shap(forest, X[0]), top_k=10)
    return {
        "importance": {FEATURE_NAMES[i]: float(importance[i])
                       for i in range(len(FEATURE_NAMES))},
        "ranking": [FEATURE_NAMES[i] for i in summary.ranking],
        "base_value": summary.base_value,
        "sample_force": {
            "base_value": force.base_value,
            "model_output": force.model_output,
            "residual": force.residual,
            "bars": [{"feature": b.feature, "value": b.value, "phi": b.phi}
                     for b in force.bars],
        },
    }, summary


def _emit_plot_data(out_dir: str, task: str, block: dict,
                    summary) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"force_{task}.json").write_text(
        canonical_json(block["sample_force"]), encoding="utf-8")
    rows = shap.beeswarm_data(summary)
    (out / f"beeswarm_{task}.json").write_text(canonical_json([
        {"feature": r.feature, "phi": list(r.phi), "values": list(r.values)}
        for r in rows]), encoding="utf-8")
    top = block["ranking"][0]
    try:
        dep = shap.dependence_data(summary, top)
    except shap.TooFewInstances:
        return
    (out / f"dependence_{task}.json").write_text(canonical_json({
        "feature": dep.feature,
        "values": list(dep.values),
        "phi": list(dep.phi),
        "color_feature": dep.color_feature,
        "color_values": list(dep.color_values),
    }), encoding="utf-8")


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Deterministic end-to-end run; see module docstring for the stages."""
    root = np.random.SeedSequence(config.seed)
    parts = root.spawn(6)
    seeds = {
        "data": int(parts[0].generate_state(1)[0]),
        "balance": int(parts[1].generate_state(1)[0]),
        "cv_classification": int(parts[2].generate_state(1)[0]),
        "cv_regression": int(parts[3].generate_state(1)[0]),
        "fit_classification": int(parts[4].generate_state(1)[0]),
        "fit_regression": int(parts[5].generate_state(1)[0]),
    }

    ds, counts = build_dataset(config, seeds["data"])
    data_text = dataset_to_text(ds)

    with _Stage("train"):
        cls_reports, cls_forest, X_cls = _evaluate_classification(
            ds, config, seeds["balance"], seeds["cv_classification"],
            seeds["fit_classification"])
        reg_reports, reg_forest, X_reg = _evaluate_regression(
            ds, config, seeds["cv_regression"], seeds["fit_regression"])

    with _Stage("summarize"):
        stats = feat.summary_stats(ds)

    with _Stage("explain"):
        sample = config.explain_sample
        cls_block, cls_summary = _explanation_block(cls_forest, X_cls, sample)
        reg_block, reg_summary = _explanation_block(reg_forest, X_reg, sample)
        if config.plot_data_dir is not None:
            _emit_plot_data(config.plot_data_dir, "classification",
                            cls_block, cls_summary)
            _emit_plot_data(config.plot_data_dir, "regression",
                            reg_block, reg_summary)

    with _Stage("report"):
        config_dict = config.as_dict()
        body = {
            "version": REPORT_VERSION,
            "data": {
                "hash": _sha256(data_text),
                **counts,
                "n_balanced_rows": len(X_cls),
            },
            "config": config_dict,
            "config_hash": _sha256(canonical_json(config_dict)),
            "seeds": seeds,
            "models": {
                "classification": {k: v.as_dict()
                                   for k, v in cls_reports.items()},
                "regression": {k: v.as_dict()
                               for k, v in reg_reports.items()},
            },
            "model_hashes": {
                "classification": mdl.forest_hash(cls_forest),
                "regression": mdl.forest_hash(reg_forest),
            },
            "summary_stats": stats,
            "explanations": {
                "classification": cls_block,
                "regression": reg_block,
            },
        }
        report_hash = _sha256(canonical_json(body))
    return ExperimentReport(**body, report_hash=report_hash)


_METRIC_SORT = {"accuracy": -1.0, "mae_ms": 1.0}  # -1: higher better


def compare_models(report: ExperimentReport | dict) -> list[dict]:
    """Ranking rows per task, best model first.

    Classification sorts by accuracy descending, regression by MAE ascending;
    ties fall back to model name. Requires at least two models per task.
    """
    doc = report.as_dict() if isinstance(report, ExperimentReport) else report
    rows: list[dict] = []
    for task in sorted(doc["models"]):
        entries = doc["models"][task]
        if len(entries) < 2:
            raise TooFewModels(
                f"task {task!r} has {len(entries)} model(s); "
                f"ranking needs at least 2")
        named = sorted(entries.items())  # stable name order for ties
        metric = named[0][1]["metric"]
        sign = _METRIC_SORT[metric]
        named.sort(key=lambda kv: sign * kv[1]["mean"])
        for rank, (name, m) in enumerate(named, start=1):
            rows.append({
                "task": task,
                "rank": rank,
                "model": name,
                "metric": m["metric"],
                "mean": m["mean"],
                "std": m["std"],
                "n_folds": m["n_folds"],
                "n_repeats": m["n_repeats"],
            })
    return rows
