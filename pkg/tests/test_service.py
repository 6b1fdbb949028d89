"""HTTP surface: predictions, explanations, schema, and the error contract."""
from __future__ import annotations

import warnings

import numpy as np
import pytest
from fastapi.testclient import TestClient

from glancelab.features import (
    FEATURE_NAMES,
    INT_FEATURES,
    balance_undersample,
    filter_dataset,
    label_engagement,
)
from glancelab.models import (
    TASK_CLASSIFICATION,
    TASK_REGRESSION,
    ForestConfig,
    fit_forest,
    forest_hash,
    predict,
)
from glancelab.segmentation import assemble_engagements
from glancelab.service import ModelBundle, build_bundle, create_app, swap_bundle
from glancelab.synthgen import GeneratorSpec, generate_trips


def _train(seed=0):
    spec = GeneratorSpec(sessions_per_trip=10, noise_sigma_ms=400)
    rows = []
    for trip, _ in generate_trips(spec, n_trips=6, seed=seed):
        for eng in assemble_engagements(trip)[0]:
            rows.append(label_engagement(eng))
    ds = filter_dataset(rows)
    bal = balance_undersample(ds, seed=1)
    cfg = ForestConfig(n_estimators=10, max_depth=6, seed=2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cls = fit_forest(bal.X(), bal.y_long(), TASK_CLASSIFICATION, cfg,
                         FEATURE_NAMES)
        reg = fit_forest(ds.X(), ds.y_tgd(), TASK_REGRESSION, cfg,
                         FEATURE_NAMES)
        return build_bundle(cls, reg, ds, explain_sample=40), ds, cls, reg


BUNDLE, DATASET, CLS_FOREST, REG_FOREST = _train()


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(BUNDLE), raise_server_exceptions=False)


def payload(**overrides):
    doc = DATASET.rows[0].features.as_dict()
    body = {k: (int(v) if k in INT_FEATURES or k in ("a_acc", "a_sa")
                else float(v))
            for k, v in doc.items()}
    body.update(overrides)
    return body


def test_predict_contract(client):
    r = client.post("/predict", json=payload())
    assert r.status_code == 200
    doc = r.json()
    assert set(doc) == {"long_glance_probability", "tgd_ms", "model_version"}
    assert 0.0 <= doc["long_glance_probability"] <= 1.0
    assert isinstance(doc["tgd_ms"], int)
    assert doc["model_version"] == (
        forest_hash(CLS_FOREST) + "-" + forest_hash(REG_FOREST))
    # matches the library prediction exactly
    x = np.array([payload()[k] for k in FEATURE_NAMES], dtype=float)
    assert doc["long_glance_probability"] == predict(CLS_FOREST, x)
    assert doc["tgd_ms"] == int(round(predict(REG_FOREST, x)))


def test_explain_embeds_the_same_prediction(client):
    body = payload()
    pred = client.post("/predict", json=body).json()
    doc = client.post("/explain", json=body).json()
    assert doc["prediction"] == pred
    cls, reg = doc["classification"], doc["regression"]
    assert cls["units"] == "probability"
    assert reg["units"] == "ms"
    for block in (cls, reg):
        assert set(block["phi"]) == set(FEATURE_NAMES)
        total = block["base_value"] + sum(block["phi"].values())
        assert total == pytest.approx(block["model_output"], abs=1e-9)
    assert cls["model_output"] == pred["long_glance_probability"]
    assert pred["tgd_ms"] == int(round(reg["model_output"]))


def test_validation_errors_name_the_field(client):
    body = payload()
    del body["v_avg"]
    r = client.post("/predict", json=body)
    assert r.status_code == 400
    assert any(d["field"] == "v_avg" for d in r.json()["detail"])

    r = client.post("/predict", json=payload(v_avg=260.0))
    assert r.status_code == 400
    assert r.json()["detail"][0]["field"] == "v_avg"

    r = client.post("/predict", json=payload(n_Tap=-1))
    assert r.status_code == 400
    assert r.json()["detail"][0]["field"] == "n_Tap"

    r = client.post("/predict", json=payload(a_acc=2))
    assert r.status_code == 400
    assert r.json()["detail"][0]["field"] == "a_acc"

    r = client.post("/predict", json=payload(N="plenty"))
    assert r.status_code == 400
    assert r.json()["detail"][0]["field"] == "N"

    r = client.post("/predict", json=payload(bogus=1))
    assert r.status_code == 400
    assert r.json()["detail"][0]["field"] == "bogus"


def test_cross_field_invariants_are_400s(client):
    body = payload()
    body["N"] = int(body["N"]) + 1          # counts no longer sum to N
    r = client.post("/predict", json=body)
    assert r.status_code == 400
    assert "sum to N" in r.json()["detail"][0]["message"]


def test_global_views(client):
    doc = client.get("/global").json()
    assert doc["model_version"] == BUNDLE.version
    for task in ("classification", "regression"):
        block = doc[task]
        assert block["n_instances"] == 40
        assert set(block["importance"]) == set(FEATURE_NAMES)
        assert len(block["ranking"]) == len(FEATURE_NAMES)
        # ranking is importance-sorted
        imps = [block["importance"][f] for f in block["ranking"]]
        assert imps == sorted(imps, reverse=True)
        assert block["beeswarm"][0]["feature"] == block["ranking"][0]
        assert len(block["beeswarm"][0]["phi"]) == 40


def test_dependence_endpoint(client):
    r = client.get("/dependence/N")
    assert r.status_code == 200
    doc = r.json()
    assert doc["feature"] == "N"
    for task in ("classification", "regression"):
        block = doc[task]
        assert len(block["values"]) == 40
        assert block["color_feature"] in FEATURE_NAMES
        assert block["color_feature"] != "N"

    r = client.get("/dependence/n_Flux")
    assert r.status_code == 404
    assert "n_Flux" in r.json()["detail"]


def test_schema_reports_training_ranges(client):
    doc = client.get("/schema").json()
    assert doc["feature_names"] == list(FEATURE_NAMES)
    assert doc["integer_features"] == sorted(INT_FEATURES)
    assert doc["model_version"] == BUNDLE.version
    X = DATASET.X()
    for i, name in enumerate(FEATURE_NAMES):
        assert doc["ranges"][name]["min"] == X[:, i].min()
        assert doc["ranges"][name]["max"] == X[:, i].max()


def test_everything_is_503_until_loaded():
    bare = TestClient(create_app(), raise_server_exceptions=False)
    assert bare.post("/predict", json=payload()).status_code == 503
    assert bare.post("/explain", json=payload()).status_code == 503
    assert bare.get("/global").status_code == 503
    assert bare.get("/dependence/N").status_code == 503
    assert bare.get("/schema").status_code == 503
    assert bare.get("/global").json() == {"detail": "models not loaded"}
    # validation still runs first on typed routes
    assert bare.post("/predict", json={"N": "x"}).status_code == 400


def test_hot_swap_changes_the_version():
    app = create_app(BUNDLE)
    client = TestClient(app, raise_server_exceptions=False)
    before = client.get("/schema").json()["model_version"]
    other, *_ = _train(seed=9)
    swap_bundle(app, other)
    after = client.get("/schema").json()["model_version"]
    assert before == BUNDLE.version
    assert after == other.version
    assert before != after


def test_cross_origin_requests_are_allowed(client):
    # the explorer page is served from a separate static origin
    r = client.get("/schema", headers={"origin": "http://localhost:8080"})
    assert r.status_code == 200
    assert r.headers["access-control-allow-origin"] == "*"

    r = client.options("/explain", headers={
        "origin": "http://localhost:8080",
        "access-control-request-method": "POST",
        "access-control-request-headers": "content-type",
    })
    assert r.status_code == 200
    assert "POST" in r.headers["access-control-allow-methods"]


def test_bundle_without_summaries_serves_null_blocks():
    lean = ModelBundle(classification_forest=CLS_FOREST,
                       regression_forest=REG_FOREST,
                       feature_stats=BUNDLE.feature_stats)
    client = TestClient(create_app(lean), raise_server_exceptions=False)
    doc = client.get("/global").json()
    assert doc["classification"] is None and doc["regression"] is None
    dep = client.get("/dependence/N").json()
    assert dep["classification"] is None and dep["regression"] is None
    assert client.post("/predict", json=payload()).status_code == 200
