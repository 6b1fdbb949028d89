"""Feature extraction, engagement labeling, and dataset-level operations.

Each secondary-task engagement becomes one row of 25 features: 16 element-type
counts, 3 gesture counts, the mean distance between consecutive interactions,
the interaction count N, mean speed, mean steering angle, and the two
driving-automation flags. Labels are the long-glance flag (any center-stack
glance strictly over 2 s) and the total center-stack glance duration in ms,
both computed on the filtered glance stream.

Dataset operations mirror the study protocol: drop implausibly long
engagements (N above a cap), engagements with a passenger present, and
engagements where the car came to a full stop; balance classes by random
undersampling; summarize columns with quartile statistics.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .glance_pipeline import (
    LONG_GLANCE_MS,
    aggregate_aoi,
    filter_glances,
    glance_metrics,
)
from .segmentation import SecondaryTaskEngagement
from .telemetry import ELEMENT_TYPES, TouchEvent

GESTURE_TYPES = ("Tap", "Drag", "Multitouch")
DRAG_THRESHOLD_PX = 10.0
N_CAP = 41
FULL_STOP_KMH = 0.1

FEATURE_NAMES: tuple[str, ...] = tuple(
    [f"n_{e}" for e in ELEMENT_TYPES]
    + [f"n_{g}" for g in GESTURE_TYPES]
    + ["d_avg", "N", "v_avg", "theta_avg", "a_acc", "a_sa"]
)
N_FEATURES = len(FEATURE_NAMES)  # 25

# Columns that hold counts / flags (integers on the wire); the rest are float.
INT_FEATURES = frozenset(
    f for f in FEATURE_NAMES if f.startswith("n_") or f in ("N", "a_acc", "a_sa"))


class FeatureError(Exception):
    pass


class EmptyDataset(FeatureError):
    pass


class OneClassOnly(FeatureError):
    """Balancing requested but the dataset has a single class."""


@dataclass(frozen=True)
class FeatureVector:
    """One engagement's 25 model inputs, in fixed column order."""

    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.values) != N_FEATURES:
            raise ValueError(
                f"expected {N_FEATURES} features, got {len(self.values)}")
        counts = self.values[:len(ELEMENT_TYPES)]
        gestures = self.values[len(ELEMENT_TYPES):len(ELEMENT_TYPES) + 3]
        n = self["N"]
        if any(c < 0 for c in counts) or any(g < 0 for g in gestures):
            raise ValueError("negative counts")
        if sum(counts) != n or sum(gestures) != n:
            raise ValueError(
                f"count columns must sum to N={n}: "
                f"elements {sum(counts)}, gestures {sum(gestures)}")
        if self["d_avg"] < 0:
            raise ValueError("negative d_avg")
        if not 0 <= self["v_avg"] <= 250:
            raise ValueError(f"v_avg {self['v_avg']} outside [0, 250]")
        if self["a_acc"] not in (0, 1) or self["a_sa"] not in (0, 1):
            raise ValueError("automation flags must be 0/1")

    def __getitem__(self, name: str) -> float:
        return self.values[FEATURE_NAMES.index(name)]

    def as_dict(self) -> dict[str, float]:
        return dict(zip(FEATURE_NAMES, self.values))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @classmethod
    def from_dict(cls, d: dict[str, float]) -> "FeatureVector":
        missing = [f for f in FEATURE_NAMES if f not in d]
        if missing:
            raise ValueError(f"missing features: {', '.join(missing)}")
        return cls(tuple(float(d[f]) for f in FEATURE_NAMES))


@dataclass(frozen=True)
class LabeledEngagement:
    features: FeatureVector
    long_glance: bool
    tgd_ms: int
    trip_id: str
    # carried for dataset-level filtering, not model inputs
    passenger_present: bool = False
    min_speed_kmh: float = float("inf")

    def __post_init__(self):
        if self.tgd_ms < 0:
            raise ValueError("negative total glance duration")


@dataclass(frozen=True)
class Dataset:
    rows: tuple[LabeledEngagement, ...]
    provenance: dict[str, int] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.rows)

    def X(self) -> np.ndarray:
        return np.array([r.features.values for r in self.rows],
                        dtype=np.float64)

    def y_long(self) -> np.ndarray:
        return np.array([float(r.long_glance) for r in self.rows])

    def y_tgd(self) -> np.ndarray:
        return np.array([float(r.tgd_ms) for r in self.rows])


def classify_gesture(e: TouchEvent,
                     drag_threshold_px: float = DRAG_THRESHOLD_PX) -> str:
    """Multitouch for >=2 fingers, else Drag when the finger moved at least
    the threshold (Euclidean), else Tap."""
    if len(e.fingers) >= 2:
        return "Multitouch"
    (sx, sy), (ex, ey) = e.fingers[0]
    if math.hypot(ex - sx, ey - sy) >= drag_threshold_px:
        return "Drag"
    return "Tap"


def interaction_centroid(e: TouchEvent) -> tuple[float, float]:
    """Mean of the finger start positions."""
    xs = [f[0][0] for f in e.fingers]
    ys = [f[0][1] for f in e.fingers]
    return (sum(xs) / len(xs), sum(ys) / len(ys))


def extract_features(s: SecondaryTaskEngagement,
                     drag_threshold_px: float = DRAG_THRESHOLD_PX
                     ) -> FeatureVector:
    """The 25-column row for one engagement (labels not included)."""
    touches = s.interaction_seq.interactions
    el_counts = {e: 0 for e in ELEMENT_TYPES}
    ges_counts = {g: 0 for g in GESTURE_TYPES}
    for t in touches:
        el_counts[t.element_type] += 1
        ges_counts[classify_gesture(t, drag_threshold_px)] += 1

    centroids = [interaction_centroid(t) for t in touches]
    if len(centroids) > 1:
        d_avg = float(np.mean([
            math.hypot(b[0] - a[0], b[1] - a[1])
            for a, b in zip(centroids, centroids[1:])]))
    else:
        d_avg = 0.0

    samples = s.driving_seq.samples
    v_avg = float(np.mean([d.speed_kmh for d in samples]))
    theta_avg = float(np.mean([d.steering_deg for d in samples]))

    values = (
        *(float(el_counts[e]) for e in ELEMENT_TYPES),
        *(float(ges_counts[g]) for g in GESTURE_TYPES),
        d_avg,
        float(len(touches)),
        v_avg,
        theta_avg,
        float(s.driving_seq.acc_active),
        float(s.driving_seq.sa_active),
    )
    return FeatureVector(values)


def label_engagement(s: SecondaryTaskEngagement,
                     long_glance_ms: int = LONG_GLANCE_MS,
                     drag_threshold_px: float = DRAG_THRESHOLD_PX
                     ) -> LabeledEngagement:
    """Aggregate + filter the attached glances, then compute features and
    both labels for one engagement."""
    cleaned = filter_glances([aggregate_aoi(g) for g in s.glance_seq.glances])
    metrics = glance_metrics(cleaned, long_glance_ms)
    return LabeledEngagement(
        features=extract_features(s, drag_threshold_px),
        long_glance=metrics.has_long_glance,
        tgd_ms=metrics.tgd_ms,
        trip_id=s.trip_id,
        passenger_present=s.passenger_present,
        min_speed_kmh=min(d.speed_kmh for d in s.driving_seq.samples),
    )


def filter_dataset(rows: list[LabeledEngagement] | tuple[LabeledEngagement, ...],
                   n_cap: int = N_CAP,
                   full_stop_kmh: float = FULL_STOP_KMH) -> Dataset:
    """Study-protocol row filtering with per-rule drop counts.

    Rules: interaction count above the cap, passenger present, and any
    windowed speed sample at or below the full-stop bound. A row at N == cap
    is kept.
    """
    kept: list[LabeledEngagement] = []
    drops = {"over_interaction_cap": 0, "passenger_present": 0, "full_stop": 0}
    for r in rows:
        if r.features["N"] > n_cap:
            drops["over_interaction_cap"] += 1
        elif r.passenger_present:
            drops["passenger_present"] += 1
        elif r.min_speed_kmh <= full_stop_kmh:
            drops["full_stop"] += 1
        else:
            kept.append(r)
    return Dataset(rows=tuple(kept), provenance=drops)


def balance_undersample(ds: Dataset, seed: int) -> Dataset:
    """Equalize the long-glance classes by uniform undersampling.

    The majority class is subsampled without replacement to the minority
    count; row order within the result is the original dataset order. Same
    seed, same selection.
    """
    pos = [i for i, r in enumerate(ds.rows) if r.long_glance]
    neg = [i for i, r in enumerate(ds.rows) if not r.long_glance]
    if not pos or not neg:
        raise OneClassOnly(
            f"cannot balance: {len(pos)} positive / {len(neg)} negative rows")
    rng = np.random.default_rng(seed)
    if len(pos) > len(neg):
        chosen = rng.choice(len(pos), size=len(neg), replace=False)
        pos = [pos[i] for i in sorted(chosen)]
    elif len(neg) > len(pos):
        chosen = rng.choice(len(neg), size=len(pos), replace=False)
        neg = [neg[i] for i in sorted(chosen)]
    keep = sorted(pos + neg)
    prov = dict(ds.provenance)
    prov["undersampled"] = len(ds.rows) - len(keep)
    return Dataset(rows=tuple(ds.rows[i] for i in keep), provenance=prov)


_STAT_NAMES = ("mean", "std", "min", "q1", "median", "q3", "max")


def summary_stats(ds: Dataset) -> dict[str, dict[str, float]]:
    """Per-column summary table over features and labels.

    std is the sample standard deviation (n-1); quartiles interpolate
    linearly between order statistics. Single-row datasets report std 0.
    """
    if not ds.rows:
        raise EmptyDataset("no rows to summarize")
    X = ds.X()
    cols = {name: X[:, i] for i, name in enumerate(FEATURE_NAMES)}
    cols["tgd_ms"] = ds.y_tgd()
    cols["long_glance"] = ds.y_long()
    out: dict[str, dict[str, float]] = {}
    for name, col in cols.items():
        q1, med, q3 = np.percentile(col, [25, 50, 75])
        out[name] = {
            "mean": float(np.mean(col)),
            "std": float(np.std(col, ddof=1)) if len(col) > 1 else 0.0,
            "min": float(np.min(col)),
            "q1": float(q1),
            "median": float(med),
            "q3": float(q3),
            "max": float(np.max(col)),
        }
    return out


# ---------------------------------------------------------------------------
# Columnar persistence: one manifest line, then one row per line with
# repr-formatted values so floats reload bit-exactly.
# ---------------------------------------------------------------------------

_DATASET_VERSION = "glancelab-dataset/1"
_LABEL_COLUMNS = ("long_glance", "tgd_ms", "trip_id", "passenger_present",
                  "min_speed_kmh")


def dataset_to_text(ds: Dataset) -> str:
    """Canonical serialization: a JSON manifest line, then one tab-separated
    row per engagement with repr-exact floats (the on-disk format)."""
    manifest = {
        "version": _DATASET_VERSION,
        "columns": list(FEATURE_NAMES) + list(_LABEL_COLUMNS),
        "n_rows": len(ds.rows),
        "provenance": ds.provenance,
    }
    lines = [json.dumps(manifest, sort_keys=True)]
    for r in ds.rows:
        cells = [repr(v) for v in r.features.values]
        cells += [
            "1" if r.long_glance else "0",
            str(r.tgd_ms),
            json.dumps(r.trip_id),
            "1" if r.passenger_present else "0",
            repr(r.min_speed_kmh),
        ]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def save_dataset(ds: Dataset, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dataset_to_text(ds))


def load_dataset(path: str | Path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        manifest = json.loads(fh.readline())
        if manifest.get("version") != _DATASET_VERSION:
            raise ValueError(
                f"unsupported dataset version {manifest.get('version')!r}")
        rows: list[LabeledEngagement] = []
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            feats = FeatureVector(tuple(float(c) for c in cells[:N_FEATURES]))
            rows.append(LabeledEngagement(
                features=feats,
                long_glance=cells[N_FEATURES] == "1",
                tgd_ms=int(cells[N_FEATURES + 1]),
                trip_id=json.loads(cells[N_FEATURES + 2]),
                passenger_present=cells[N_FEATURES + 3] == "1",
                min_speed_kmh=float(cells[N_FEATURES + 4]),
            ))
    if len(rows) != manifest["n_rows"]:
        raise ValueError(
            f"manifest says {manifest['n_rows']} rows, file has {len(rows)}")
    return Dataset(rows=tuple(rows), provenance=dict(manifest["provenance"]))
