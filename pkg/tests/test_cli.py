"""CLI subcommands: happy paths, determinism, and the exit-code contract."""
from __future__ import annotations

import json
import subprocess
import sys

import pytest

from glancelab import eval_reports as ev
from glancelab import models as mdl
from glancelab.cli import main
from glancelab.features import FEATURE_NAMES, load_dataset
from glancelab.models import load_forest

SYNTH_SPEC = {"sessions_per_trip": 10, "noise_sigma_ms": 400}


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    """One synthetic fleet, featurized and with both models trained."""
    root = tmp_path_factory.mktemp("cli")
    logs = root / "logs"
    data = root / "dataset.tsv"
    spec = root / "spec.json"
    spec.write_text(json.dumps(SYNTH_SPEC))
    assert main(["synth", "--out", str(logs), "--n-trips", "4",
                 "--seed", "5", "--spec", str(spec)]) == 0
    assert main(["featurize", "--logs", str(logs), "--out", str(data)]) == 0
    cls = root / "cls.json"
    reg = root / "reg.json"
    assert main(["train", "--task", "long_glance", "--data", str(data),
                 "--out", str(cls), "--seed", "1",
                 "--n-estimators", "10", "--max-depth", "6"]) == 0
    assert main(["train", "--task", "tgd", "--data", str(data),
                 "--out", str(reg), "--seed", "1",
                 "--n-estimators", "10", "--max-depth", "6"]) == 0
    return {"root": root, "logs": logs, "data": data, "cls": cls, "reg": reg}


def test_synth_writes_logs_and_ground_truth(work):
    names = sorted(p.name for p in work["logs"].iterdir())
    assert names == ["ground_truth.json", "synth-5-0000.jsonl",
                     "synth-5-0001.jsonl", "synth-5-0002.jsonl",
                     "synth-5-0003.jsonl"]
    truths = json.loads((work["logs"] / "ground_truth.json").read_text())
    assert set(truths) == {f"synth-5-{i:04d}" for i in range(4)}
    assert all(len(v) == 10 for v in truths.values())


def test_ingest_round_trips_normalized_logs(work, tmp_path, capsys):
    src = work["logs"] / "synth-5-0000.jsonl"
    out = tmp_path / "normalized.jsonl"
    assert main(["ingest", str(src), "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "trip synth-5-0000:" in stdout
    assert "glance segments" in stdout
    # generated logs are already in normal form
    assert out.read_bytes() == src.read_bytes()


def test_segment_reports_every_session(work, tmp_path, capsys):
    src = work["logs"] / "synth-5-0001.jsonl"
    out = tmp_path / "windows.json"
    assert main(["segment", str(src), "--out", str(out)]) == 0
    truths = json.loads((work["logs"] / "ground_truth.json").read_text())
    expected = truths["synth-5-0001"]
    summary = capsys.readouterr().out
    assert f"{len(expected)} engagements kept" in summary
    rows = json.loads(out.read_text())
    assert len(rows) == len(expected)
    for row, t in zip(rows, expected):
        assert row["start_ms"] == t["t_first_ms"]
        assert row["end_ms"] == t["t_last_ms"]
        assert row["n"] == t["n"]
        assert row["acc_active"] == t["acc_active"]
    # without --out the windows go to stdout, one JSON object per line
    assert main(["segment", str(src)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 1 + len(expected)
    assert json.loads(lines[1])["start_ms"] == expected[0]["t_first_ms"]


def test_featurize_matches_session_count(work):
    ds = load_dataset(work["data"])
    truths = json.loads((work["logs"] / "ground_truth.json").read_text())
    assert len(ds) == sum(len(v) for v in truths.values())


def test_train_is_deterministic(work, tmp_path, capsys):
    out_a = tmp_path / "a.json"
    out_b = tmp_path / "b.json"
    args = ["train", "--task", "tgd", "--data", str(work["data"]),
            "--seed", "7", "--n-estimators", "5", "--max-depth", "4"]
    assert main(args + ["--out", str(out_a)]) == 0
    assert main(args + ["--out", str(out_b)]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()
    assert load_forest(out_a).task == "regression"
    assert "trained tgd forest" in capsys.readouterr().out
    c = tmp_path / "c.json"
    assert main(["train", "--task", "tgd", "--data", str(work["data"]),
                 "--seed", "8", "--n-estimators", "5", "--max-depth", "4",
                 "--out", str(c)]) == 0
    assert c.read_bytes() != out_a.read_bytes()


def test_train_with_search_uses_the_best_draw(work, tmp_path, capsys,
                                              monkeypatch):
    monkeypatch.setattr(mdl, "DEFAULT_SEARCH_SPACE", {
        "n_estimators": (3, 5), "max_depth": (3, 4),
        "min_samples_split": (2,), "min_samples_leaf": (1,),
        "bootstrap": (True,), "max_features": ("all",)})
    out = tmp_path / "tuned.json"
    assert main(["train", "--task", "tgd", "--data", str(work["data"]),
                 "--out", str(out), "--seed", "3", "--search", "2"]) == 0
    stdout = capsys.readouterr().out
    assert "search over 2 draws" in stdout
    assert load_forest(out).config.n_estimators in (3, 5)


def test_explain_exports_an_additive_document(work, tmp_path, capsys):
    ds = load_dataset(work["data"])
    instance = tmp_path / "x.json"
    instance.write_text(json.dumps(ds.rows[0].features.as_dict()))
    out = tmp_path / "explanation.json"
    assert main(["explain", "--model", str(work["reg"]),
                 "--instance", str(instance), "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "f(x) =" in stdout and "base =" in stdout
    doc = json.loads(out.read_text())
    assert doc["units"] == "ms"
    assert set(doc["phi"]) == set(FEATURE_NAMES)
    total = doc["base_value"] + sum(doc["phi"].values())
    assert total == pytest.approx(doc["model_output"], abs=1e-9)


def test_evaluate_end_to_end(work, tmp_path, capsys, monkeypatch):
    # the study presets (200/1600 trees) are far too heavy for a CLI
    # wiring test; shrink them and test the statistics elsewhere
    tiny = mdl.ForestConfig(n_estimators=8, max_depth=5)
    monkeypatch.setattr(ev, "CLASSIFICATION_PRESET", tiny)
    monkeypatch.setattr(ev, "REGRESSION_PRESET", tiny)
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SYNTH_SPEC))
    out = tmp_path / "report.json"
    assert main(["evaluate", "--synth-spec", str(spec), "--n-trips", "6",
                 "--out", str(out), "--seed", "2"]) == 0
    stdout = capsys.readouterr().out
    assert "report " in stdout
    # two tasks x three models, ranked
    ranked = [ln for ln in stdout.splitlines() if "#" in ln]
    assert len(ranked) == 6
    doc = json.loads(out.read_text())
    assert doc["version"] == "glancelab-report/1"


def test_serve_rejects_swapped_models(work, capsys):
    rc = main(["serve", "--classifier", str(work["reg"]),
               "--regressor", str(work["cls"]), "--data", str(work["data"]),
               "--port", "0"])
    assert rc == 1
    assert "error: [serve]" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

def test_data_errors_exit_1_with_stage_tag(work, tmp_path, capsys):
    assert main(["ingest", str(tmp_path / "missing.jsonl")]) == 1
    assert "error: [ingest]" in capsys.readouterr().err

    assert main(["train", "--task", "tgd", "--data",
                 str(tmp_path / "nope.tsv"), "--out",
                 str(tmp_path / "m.json")]) == 1
    assert "error: [train]" in capsys.readouterr().err

    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps(SYNTH_SPEC))
    assert main(["evaluate", "--logs", str(tmp_path), "--synth-spec",
                 str(spec), "--out", str(tmp_path / "r.json")]) == 1
    assert "error: [evaluate]" in capsys.readouterr().err

    bad = tmp_path / "bad.json"
    bad.write_text('{"N": 1.0}')
    assert main(["explain", "--model", str(work["reg"]),
                 "--instance", str(bad),
                 "--out", str(tmp_path / "e.json")]) == 1
    assert "error: [explain]" in capsys.readouterr().err


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as exc:
        main(["defragment"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["train", "--task", "tgd"])          # missing required args
    assert exc.value.code == 2


def test_console_script_is_wired():
    proc = subprocess.run([sys.executable, "-m", "glancelab.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "subcommand" in proc.stdout or "ingest" in proc.stdout
    proc = subprocess.run(["glancelab", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    assert "ingest" in proc.stdout
