"""HTTP/JSON service: predictions and explanations for what-if clients.

Endpoints (all JSON):
  POST /predict            both task predictions for one feature vector
  POST /explain            predictions plus one explanation per task
  GET  /global             importance ranking + beeswarm rows per task
  GET  /dependence/{name}  dependence scatter with server-chosen coloring
  GET  /schema             feature names, integer columns, training ranges

Error contract: invalid vectors return 400 with per-field diagnostics
(including violations of the cross-field invariants), unknown feature names
return 404, and every endpoint returns 503 until models are loaded.
Responses carry permissive CORS headers so browser clients served from a
different origin (the bundled explorer page) can call the API directly.

Requests are stateless and the loaded models are immutable, so concurrent
requests are safe; `swap_bundle` replaces the whole model bundle between
requests via a single attribute assignment. Responses are deterministic for
a fixed `model_version`, and /explain embeds the same prediction object
/predict would return for the vector, computed by the same code path.
Probabilities are plain decimals; millisecond predictions are integers.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field, create_model

from .features import (
    Dataset,
    FEATURE_NAMES,
    FeatureVector,
    INT_FEATURES,
    summary_stats,
)
from .models import Forest, forest_hash, predict
from .shap_engine import (
    GlobalSummary,
    beeswarm_data,
    dependence_data,
    explain_dataset,
    explanation_to_doc,
    tree_shap,
    TooFewInstances,
)


@dataclass(frozen=True)
class ModelBundle:
    """Everything the service needs, loaded once and treated as immutable."""

    classification_forest: Forest
    regression_forest: Forest
    feature_stats: dict                      # summary_stats() output
    classification_summary: GlobalSummary | None = None
    regression_summary: GlobalSummary | None = None

    @property
    def version(self) -> str:
        return (forest_hash(self.classification_forest)
                + "-" + forest_hash(self.regression_forest))


def build_bundle(classification_forest: Forest, regression_forest: Forest,
                 dataset: Dataset, explain_sample: int = 200) -> ModelBundle:
    """Bundle trained forests with training-set stats and the explained
    sample that powers the global views."""
    X = dataset.X()
    sample = X[:explain_sample]
    return ModelBundle(
        classification_forest=classification_forest,
        regression_forest=regression_forest,
        feature_stats=summary_stats(dataset),
        classification_summary=explain_dataset(classification_forest, sample),
        regression_summary=explain_dataset(regression_forest, sample),
    )


def _field_spec(name: str):
    if name in ("a_acc", "a_sa"):
        return (int, Field(ge=0, le=1))
    if name in INT_FEATURES:
        return (int, Field(ge=0))
    if name == "v_avg":
        return (float, Field(ge=0, le=250, allow_inf_nan=False))
    if name == "d_avg":
        return (float, Field(ge=0, allow_inf_nan=False))
    return (float, Field(allow_inf_nan=False))


class _StrictBase(BaseModel):
    model_config = {"extra": "forbid"}


VectorRequest = create_model(
    "VectorRequest",
    __base__=_StrictBase,
    **{name: _field_spec(name) for name in FEATURE_NAMES},
)


def _to_vector(req) -> np.ndarray:
    vec = FeatureVector(tuple(float(getattr(req, n)) for n in FEATURE_NAMES))
    return vec.as_array()


def create_app(bundle: ModelBundle | None = None) -> FastAPI:
    app = FastAPI(title="glancelab", docs_url=None, redoc_url=None)
    app.state.bundle = bundle
    # The browser explorer is served as static files from a different
    # origin; the API is read-only and unauthenticated, so a blanket
    # allow is the whole CORS story.
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])

    @app.exception_handler(RequestValidationError)
    async def _validation_to_400(request: Request,
                                 exc: RequestValidationError):
        detail = [{
            "field": ".".join(str(p) for p in err["loc"] if p != "body"),
            "message": err["msg"],
        } for err in exc.errors()]
        return JSONResponse(status_code=400, content={"detail": detail})

    @app.exception_handler(ValueError)
    async def _invariant_to_400(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content={"detail": [{"field": "", "message": str(exc)}]})

    def _bundle() -> ModelBundle:
        b = app.state.bundle
        if b is None:
            raise _NotLoaded()
        return b

    @app.exception_handler(_NotLoaded)
    async def _not_loaded_to_503(request: Request, exc: "_NotLoaded"):
        return JSONResponse(status_code=503,
                            content={"detail": "models not loaded"})

    def _prediction(b: ModelBundle, x: np.ndarray) -> dict:
        return {
            "long_glance_probability": float(
                predict(b.classification_forest, x)),
            "tgd_ms": int(round(predict(b.regression_forest, x))),
            "model_version": b.version,
        }

    @app.post("/predict")
    async def predict_endpoint(req: VectorRequest):
        b = _bundle()
        return _prediction(b, _to_vector(req))

    @app.post("/explain")
    async def explain_endpoint(req: VectorRequest):
        b = _bundle()
        x = _to_vector(req)
        cls_expl = tree_shap(b.classification_forest, x)
        reg_expl = tree_shap(b.regression_forest, x)
        return {
            "prediction": _prediction(b, x),
            "classification": explanation_to_doc(cls_expl,
                                                 units="probability"),
            "regression": explanation_to_doc(reg_expl, units="ms"),
        }

    def _global_block(summary: GlobalSummary | None) -> dict | None:
        if summary is None or len(summary.phi_matrix) == 0:
            return None
        importance = summary.importance
        return {
            "importance": {summary.feature_names[i]: float(importance[i])
                           for i in range(len(summary.feature_names))},
            "ranking": [summary.feature_names[i] for i in summary.ranking],
            "base_value": summary.base_value,
            "n_instances": int(summary.phi_matrix.shape[0]),
            "beeswarm": [{
                "feature": r.feature,
                "phi": list(r.phi),
                "values": list(r.values),
            } for r in beeswarm_data(summary)],
        }

    @app.get("/global")
    async def global_endpoint():
        b = _bundle()
        return {
            "model_version": b.version,
            "classification": _global_block(b.classification_summary),
            "regression": _global_block(b.regression_summary),
        }

    def _dependence_block(summary: GlobalSummary | None,
                          feature: str) -> dict | None:
        if summary is None:
            return None
        try:
            dep = dependence_data(summary, feature)
        except TooFewInstances:
            return None
        return {
            "feature": dep.feature,
            "values": list(dep.values),
            "phi": list(dep.phi),
            "color_feature": dep.color_feature,
            "color_values": list(dep.color_values),
        }

    @app.get("/dependence/{feature}")
    async def dependence_endpoint(feature: str):
        b = _bundle()
        if feature not in FEATURE_NAMES:
            return JSONResponse(
                status_code=404,
                content={"detail": f"unknown feature {feature!r}"})
        return {
            "model_version": b.version,
            "feature": feature,
            "classification": _dependence_block(b.classification_summary,
                                                feature),
            "regression": _dependence_block(b.regression_summary, feature),
        }

    @app.get("/schema")
    async def schema_endpoint():
        b = _bundle()
        ranges = {
            name: {"min": b.feature_stats[name]["min"],
                   "max": b.feature_stats[name]["max"]}
            for name in FEATURE_NAMES
        }
        return {
            "feature_names": list(FEATURE_NAMES),
            "integer_features": sorted(INT_FEATURES),
            "ranges": ranges,
            "model_version": b.version,
        }

    return app


class _NotLoaded(Exception):
    pass


def swap_bundle(app: FastAPI, bundle: ModelBundle) -> None:
    """Atomic hot swap: one attribute assignment, next request sees it."""
    app.state.bundle = bundle
