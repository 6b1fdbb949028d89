"""Command-line entry points: one subcommand per pipeline stage.

    ingest     validate a raw trip log, optionally write the normal form
    segment    sessionize a trip and report engagement windows + drops
    featurize  logs directory -> labeled dataset file
    train      dataset -> forest model file (optionally tuned first)
    evaluate   full experiment -> report JSON + model ranking table
    explain    model + instance JSON -> exported explanation
    synth      generator spec -> directory of synthetic trip logs
    serve      start the HTTP service with trained models

Usage errors exit 2 (argparse's convention); data/processing errors exit 1
with a stage-tagged one-line message on stderr. Every random choice is
derived from --seed, so reruns with the same inputs are byte-identical.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import eval_reports as ev
from . import features as feat
from . import models as mdl
from . import segmentation as seg
from . import shap_engine as shap
from . import synthgen
from . import telemetry as tel

TASK_FLAGS = {"long_glance": mdl.TASK_CLASSIFICATION,
              "tgd": mdl.TASK_REGRESSION}
DEFAULT_PORT = 8000


class CliError(Exception):
    """Data-level failure; `.stage` names the pipeline stage."""

    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


# ---------------------------------------------------------------------------
# subcommand implementations
# ---------------------------------------------------------------------------

def cmd_ingest(args) -> int:
    trip = tel.ingest_trip(args.log, format=args.format)
    print(f"trip {trip.trip_id}: {len(trip.touches)} touches, "
          f"{len(trip.glances)} glance segments, "
          f"{len(trip.driving)} driving samples, {len(trip.states)} states")
    if args.out:
        tel.write_trip(trip, args.out)
        print(f"wrote normalized log to {args.out}")
    return 0


def cmd_segment(args) -> int:
    trip = tel.ingest_trip(args.log)
    engagements, drops = seg.assemble_engagements(
        trip, args.max_gap_ms, args.buffer_ms)
    print(f"trip {trip.trip_id}: {drops.kept} engagements kept "
          f"({json.dumps(drops.as_dict(), sort_keys=True)})")
    rows = [{
        "trip_id": s.trip_id,
        "start_ms": s.interaction_seq.start_ms,
        "end_ms": s.interaction_seq.end_ms,
        "n": s.interaction_seq.n,
        "n_glance_segments": len(s.glance_seq.glances),
        "acc_active": s.driving_seq.acc_active,
        "sa_active": s.driving_seq.sa_active,
        "passenger_present": s.passenger_present,
    } for s in engagements]
    if args.out:
        Path(args.out).write_text(
            json.dumps(rows, sort_keys=True, indent=2) + "\n",
            encoding="utf-8")
        print(f"wrote {len(rows)} engagement windows to {args.out}")
    else:
        for r in rows:
            print(json.dumps(r, sort_keys=True))
    return 0


def cmd_featurize(args) -> int:
    paths = sorted(Path(args.logs).glob("*.jsonl"))
    if not paths:
        raise CliError("featurize", f"no .jsonl trip logs under {args.logs}")
    rows = []
    for p in paths:
        trip = tel.ingest_trip(p)
        engagements, _ = seg.assemble_engagements(
            trip, args.max_gap_ms, args.buffer_ms)
        rows.extend(feat.label_engagement(s) for s in engagements)
    ds = feat.filter_dataset(rows, args.n_cap, args.full_stop_kmh)
    feat.save_dataset(ds, args.out)
    print(f"{len(paths)} trips -> {len(rows)} engagements -> "
          f"{len(ds)} rows (drops: {json.dumps(ds.provenance, sort_keys=True)})")
    print(f"wrote dataset to {args.out}")
    return 0


def _forest_config(args, task: str) -> mdl.ForestConfig:
    base = (mdl.CLASSIFICATION_PRESET if task == mdl.TASK_CLASSIFICATION
            else mdl.REGRESSION_PRESET)
    overrides = {}
    for name in ("n_estimators", "max_depth", "min_samples_split",
                 "min_samples_leaf"):
        v = getattr(args, name)
        if v is not None:
            overrides[name] = v
    return replace(base, **overrides)


def cmd_train(args) -> int:
    ds = feat.load_dataset(args.data)
    task = TASK_FLAGS[args.task]
    ss = np.random.SeedSequence(args.seed).spawn(3)
    balance_seed, fit_seed, search_seed = (
        int(s.generate_state(1)[0]) for s in ss)
    if task == mdl.TASK_CLASSIFICATION:
        ds = feat.balance_undersample(ds, balance_seed)
        y = ds.y_long()
    else:
        y = ds.y_tgd()
    X = ds.X()
    config = _forest_config(args, task)
    if args.search:
        result = mdl.random_search(X, y, task, budget=args.search,
                                   seed=search_seed, n_jobs=args.jobs)
        config = result.best_config
        print(f"search over {args.search} draws: best {config} "
              f"(score {result.best_score:.4f})")
    config = replace(config, seed=fit_seed)
    forest = mdl.fit_forest(X, y, task, config, feat.FEATURE_NAMES,
                            n_jobs=args.jobs)
    mdl.save_forest(forest, args.out)
    print(f"trained {args.task} forest on {len(X)} rows "
          f"({config.n_estimators} trees) -> {args.out} "
          f"[{mdl.forest_hash(forest)}]")
    return 0


def cmd_evaluate(args) -> int:
    if (args.logs is None) == (args.synth_spec is None):
        raise CliError("evaluate",
                       "pass exactly one of --logs / --synth-spec")
    generator = None
    if args.synth_spec:
        generator = _load_generator_spec(args.synth_spec)
    config = ev.ExperimentConfig(
        logs_dir=args.logs,
        generator=generator,
        n_trips=args.n_trips,
        seed=args.seed,
        n_folds=args.folds,
        plot_data_dir=args.emit_plot_data,
        n_jobs=args.jobs,
    )
    report = ev.run_experiment(config)
    ev.save_report(report, args.out)
    print(f"report {report.report_hash[:16]} -> {args.out}")
    for row in ev.compare_models(report):
        print(f"{row['task']:>14}  #{row['rank']}  {row['model']:<20} "
              f"{row['metric']}={row['mean']:.4f} (std {row['std']:.4f})")
    return 0


def cmd_explain(args) -> int:
    forest = mdl.load_forest(args.model)
    instance = json.loads(Path(args.instance).read_text(encoding="utf-8"))
    vec = feat.FeatureVector.from_dict(instance)
    expl = shap.tree_shap(forest, vec.as_array())
    units = ("probability" if forest.task == mdl.TASK_CLASSIFICATION
             else "ms")
    shap.export_explanation(expl, args.out, units=units)
    force = shap.force_data(expl, top_k=5)
    print(f"f(x) = {expl.model_output:.6f}  base = {expl.base_value:.6f}")
    for bar in force.bars:
        print(f"  {bar.phi:+10.4f}  {bar.feature} = {bar.value:g}")
    print(f"wrote explanation to {args.out}")
    return 0


def _load_generator_spec(path: str) -> synthgen.GeneratorSpec:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if "element_mix" in doc:
        doc["element_mix"] = tuple(
            (str(n), float(p)) for n, p in doc["element_mix"])
    if "n_range" in doc:
        doc["n_range"] = tuple(doc["n_range"])
    return synthgen.GeneratorSpec(**doc)


def cmd_synth(args) -> int:
    spec = (_load_generator_spec(args.spec) if args.spec
            else synthgen.GeneratorSpec())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truths_doc = {}
    for trip, truths in synthgen.generate_trips(spec, args.n_trips,
                                                args.seed):
        tel.write_trip(trip, out / f"{trip.trip_id}.jsonl")
        truths_doc[trip.trip_id] = [t.__dict__ for t in truths]
    (out / "ground_truth.json").write_text(
        json.dumps(truths_doc, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    n_sessions = sum(len(v) for v in truths_doc.values())
    print(f"wrote {args.n_trips} trips ({n_sessions} sessions) to {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from . import service

    cls_forest = mdl.load_forest(args.classifier)
    reg_forest = mdl.load_forest(args.regressor)
    if cls_forest.task != mdl.TASK_CLASSIFICATION:
        raise CliError("serve", f"{args.classifier} is not a "
                       f"classification model")
    if reg_forest.task != mdl.TASK_REGRESSION:
        raise CliError("serve", f"{args.regressor} is not a regression model")
    ds = feat.load_dataset(args.data)
    bundle = service.build_bundle(cls_forest, reg_forest, ds,
                                  explain_sample=args.explain_sample)
    app = service.create_app(bundle)
    port = args.port or int(os.environ.get("GLANCELAB_PORT", DEFAULT_PORT))
    print(f"serving models {bundle.version} on {args.host}:{port}")
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="glancelab",
        description="glance-behavior pipeline: ingest, model, explain")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="validate a raw trip log")
    sp.add_argument("log", help="path to a trip log")
    sp.add_argument("--format", default="jsonl", choices=["jsonl"])
    sp.add_argument("--out", default=None,
                    help="write the normalized log here")
    sp.set_defaults(func=cmd_ingest, stage="ingest")

    sp = sub.add_parser("segment", help="sessionize one trip")
    sp.add_argument("log")
    sp.add_argument("--max-gap-ms", type=int, default=seg.DEFAULT_MAX_GAP_MS)
    sp.add_argument("--buffer-ms", type=int, default=seg.DEFAULT_BUFFER_MS)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_segment, stage="segment")

    sp = sub.add_parser("featurize", help="logs directory -> dataset file")
    sp.add_argument("--logs", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--max-gap-ms", type=int, default=seg.DEFAULT_MAX_GAP_MS)
    sp.add_argument("--buffer-ms", type=int, default=seg.DEFAULT_BUFFER_MS)
    sp.add_argument("--n-cap", type=int, default=feat.N_CAP)
    sp.add_argument("--full-stop-kmh", type=float, default=feat.FULL_STOP_KMH)
    sp.set_defaults(func=cmd_featurize, stage="featurize")

    sp = sub.add_parser("train", help="fit a forest on a dataset")
    sp.add_argument("--task", required=True, choices=sorted(TASK_FLAGS))
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--search", type=int, default=0, metavar="BUDGET",
                    help="random-search this many configurations first")
    sp.add_argument("--n-estimators", type=int, default=None)
    sp.add_argument("--max-depth", type=int, default=None)
    sp.add_argument("--min-samples-split", type=int, default=None)
    sp.add_argument("--min-samples-leaf", type=int, default=None)
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_train, stage="train")

    sp = sub.add_parser("evaluate", help="end-to-end experiment -> report")
    sp.add_argument("--logs", default=None)
    sp.add_argument("--synth-spec", default=None,
                    help="generator spec JSON instead of real logs")
    sp.add_argument("--n-trips", type=int, default=20)
    sp.add_argument("--out", required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--folds", type=int, default=10)
    sp.add_argument("--emit-plot-data", default=None, metavar="DIR",
                    help="also write force/beeswarm/dependence data files")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_evaluate, stage="evaluate")

    sp = sub.add_parser("explain", help="explain one instance")
    sp.add_argument("--model", required=True)
    sp.add_argument("--instance", required=True,
                    help="JSON file mapping feature names to values")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_explain, stage="explain")

    sp = sub.add_parser("synth", help="generate synthetic trip logs")
    sp.add_argument("--spec", default=None,
                    help="generator spec JSON (defaults used when omitted)")
    sp.add_argument("--out", required=True)
    sp.add_argument("--n-trips", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(func=cmd_synth, stage="synth")

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--classifier", required=True)
    sp.add_argument("--regressor", required=True)
    sp.add_argument("--data", required=True,
                    help="training dataset (schema ranges + global views)")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=None,
                    help=f"default $GLANCELAB_PORT or {DEFAULT_PORT}")
    sp.add_argument("--explain-sample", type=int, default=200)
    sp.set_defaults(func=cmd_serve, stage="serve")

    return p


_DATA_ERRORS = (
    tel.TelemetryError,
    seg.SegmentationError,
    feat.FeatureError,
    mdl.ModelError,
    shap.ShapError,
    ev.EvalError,
    synthgen.InfeasibleSpec,
    CliError,
    OSError,
    json.JSONDecodeError,
    ValueError,
)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        stage = getattr(exc, "stage", args.stage)
        print(f"error: [{stage}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
