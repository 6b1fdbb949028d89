"""
Command line to HTTP service, round trip
========================================

The shipped interfaces end to end: synthesize a fleet and train both task
models through the `glancelab` CLI, then stand the prediction service up
in-process and drive /schema, /predict and /explain the way the browser
explorer does.
"""
import json
import subprocess
import sys
import tempfile
from pathlib import Path

import warnings

warnings.filterwarnings("ignore", message="Using `httpx` with")
from fastapi.testclient import TestClient

from glancelab.features import load_dataset
from glancelab.models import load_forest
from glancelab.service import build_bundle, create_app

work = Path(tempfile.mkdtemp(prefix="glancelab-demo-"))


def cli(*args):
    cmd = [sys.executable, "-m", "glancelab.cli", *args]
    print(f"$ glancelab {' '.join(args)}")
    out = subprocess.run(cmd, capture_output=True, text=True, check=True)
    for line in out.stdout.strip().splitlines():
        print(f"  {line}")


# ---------------------------------------------------------------------------
# 1. Fleet -> features -> two trained models, all through the CLI.
# ---------------------------------------------------------------------------
spec_path = work / "spec.json"
spec_path.write_text(json.dumps(
    {"sessions_per_trip": 12, "noise_sigma_ms": 500}))
cli("synth", "--spec", str(spec_path), "--out", str(work / "logs"),
    "--n-trips", "30", "--seed", "3")
cli("featurize", "--logs", str(work / "logs"),
    "--out", str(work / "data.jsonl"))
cli("train", "--task", "long_glance", "--data", str(work / "data.jsonl"),
    "--out", str(work / "cls.json"), "--n-estimators", "20",
    "--max-depth", "8", "--seed", "1")
cli("train", "--task", "tgd", "--data", str(work / "data.jsonl"),
    "--out", str(work / "reg.json"), "--n-estimators", "20",
    "--max-depth", "10", "--seed", "1")

# ---------------------------------------------------------------------------
# 2. Load what the CLI wrote and stand the service up in-process. (The real
#    deployment is `glancelab serve --classifier ... --regressor ...`; the
#    test client speaks to the same app object.)
# ---------------------------------------------------------------------------
dataset = load_dataset(work / "data.jsonl")
bundle = build_bundle(load_forest(work / "cls.json"),
                      load_forest(work / "reg.json"),
                      dataset, explain_sample=100)
client = TestClient(create_app(bundle))

schema = client.get("/schema").json()
print(f"\n/schema: {len(schema['feature_names'])} features, ranges from "
      f"training data, e.g. N in {schema['ranges']['N']}")

# ---------------------------------------------------------------------------
# 3. Predict and explain one engagement, exactly as the explorer UI does.
# ---------------------------------------------------------------------------
instance = dataset.rows[0].features.as_dict()
for name in schema["integer_features"] + ["a_acc", "a_sa"]:
    instance[name] = int(instance[name])

pred = client.post("/predict", json=instance).json()
print(f"\n/predict -> long-glance probability "
      f"{pred['long_glance_probability']:.2f}, "
      f"tgd {pred['tgd_ms']} ms (models {pred['model_version'][:12]}...)")

expl = client.post("/explain", json=instance).json()
reg = expl["regression"]
top = sorted(reg["phi"].items(), key=lambda kv: -abs(kv[1]))[:4]
print(f"/explain -> base {reg['base_value']:.0f} {reg['units']}, "
      "largest contributions:")
for name, phi in top:
    print(f"  {name:>12} {phi:+9.1f} {reg['units']}")

# ---------------------------------------------------------------------------
# 4. Malformed input comes back as a field-level 400, which the UI renders
#    next to the offending control.
# ---------------------------------------------------------------------------
bad = dict(instance, v_avg=400.0)
resp = client.post("/predict", json=bad)
print(f"\nout-of-range v_avg -> {resp.status_code}: "
      f"{resp.json()['detail'][0]}")

print(f"\nartifacts under {work}")
