"""Raw telemetry types and trip-log I/O.

A trip log bundles four event streams recorded on one drive: touchscreen
interactions, eye-glance segments, CAN driving samples, and controller /
occupancy state changes. Everything downstream (sessionization, glance
filtering, feature extraction) consumes these types, so validation is
front-loaded here: a `TripLog` that constructs successfully is sorted,
in-bounds, and contiguous where contiguity is required.

On disk a trip is line-delimited JSON: a `header` record first, then one
record per event tagged with a `kind` field. Floats survive a write/read
cycle bit-exactly (json uses repr round-tripping).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

# Touch element types, in canonical (feature-column) order.
ELEMENT_TYPES: tuple[str, ...] = (
    "Button", "List", "Map", "Slider", "Homebar", "CoverFlow", "AppIcon",
    "Tab", "Keyboard", "Browser", "RemoteUI", "ControlBar", "PopUp",
    "ClickGuard", "Other", "Unknown",
)

# Canonical areas of interest after aggregation (raw logs may carry finer
# codes; see glance_pipeline.aggregate_aoi).
ON_ROAD = "on_road"
OFF_ROAD = "off_road"
CENTER_STACK = "center_stack"
TRACKING_LOSS = "tracking_loss"
EYES_CLOSED = "eyes_closed"
CANONICAL_AOIS = (ON_ROAD, OFF_ROAD, CENTER_STACK, TRACKING_LOSS, EYES_CLOSED)

STATE_KINDS = (
    "acc_active", "acc_inactive",
    "sa_active", "sa_inactive",
    "passenger_belt_on", "passenger_belt_off",
)

DRIVING_PERIOD_MS = 250          # nominal 4 Hz CAN cadence
SPEED_REJECT_KMH = 250.0         # physically implausible, reject the record
SPEED_FLAG_KMH = 210.0           # above any governed top speed, keep but warn


class TelemetryError(Exception):
    """Base class for trip-log validation failures."""


class MalformedRecord(TelemetryError):
    """A single record failed validation; carries its 1-based line number."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class UnsortedTimestamps(TelemetryError):
    """A stream violates its ordering/contiguity invariant."""


@dataclass(frozen=True)
class TouchEvent:
    """One touchscreen interaction.

    `fingers` holds one ((start_x, start_y), (end_x, end_y)) pair per finger,
    in screen pixels. Taps have start == end for the moving finger.
    """

    timestamp_ms: int
    element_id: str
    element_type: str
    fingers: tuple[tuple[tuple[float, float], tuple[float, float]], ...]

    def __post_init__(self):
        if self.timestamp_ms < 0:
            raise ValueError(f"negative timestamp {self.timestamp_ms}")
        if self.element_type not in ELEMENT_TYPES:
            raise ValueError(f"unknown element type {self.element_type!r}")
        if not self.fingers:
            raise ValueError("touch event with no fingers")


@dataclass(frozen=True)
class RawGlanceSegment:
    """One segment of the eye-tracker stream: [start_ms, end_ms) on `target`."""

    start_ms: int
    end_ms: int
    target: str

    def __post_init__(self):
        if self.start_ms < 0:
            raise ValueError(f"negative start {self.start_ms}")
        if self.end_ms <= self.start_ms:
            raise ValueError(
                f"non-positive duration [{self.start_ms}, {self.end_ms})")
        if not self.target:
            raise ValueError("empty glance target")

    @property
    def duration_ms(self) -> int:
        return self.end_ms - self.start_ms


@dataclass(frozen=True)
class DrivingSample:
    """One 4 Hz CAN sample: vehicle speed and steering-wheel angle."""

    timestamp_ms: int
    speed_kmh: float
    steering_deg: float = 0.0

    def __post_init__(self):
        if self.timestamp_ms < 0:
            raise ValueError(f"negative timestamp {self.timestamp_ms}")
        if not math.isfinite(self.speed_kmh) or self.speed_kmh < 0:
            raise ValueError(f"bad speed {self.speed_kmh}")
        if self.speed_kmh > SPEED_REJECT_KMH:
            raise ValueError(
                f"speed {self.speed_kmh} km/h above plausibility bound")
        if not math.isfinite(self.steering_deg):
            raise ValueError(f"non-finite steering angle {self.steering_deg}")


@dataclass(frozen=True)
class StateEvent:
    timestamp_ms: int
    kind: str

    def __post_init__(self):
        if self.timestamp_ms < 0:
            raise ValueError(f"negative timestamp {self.timestamp_ms}")
        if self.kind not in STATE_KINDS:
            raise ValueError(f"unknown state kind {self.kind!r}")


@dataclass(frozen=True)
class TripLog:
    """One drive's worth of telemetry, all streams sorted and validated."""

    trip_id: str
    screen_w_px: float
    screen_h_px: float
    touches: tuple[TouchEvent, ...] = ()
    glances: tuple[RawGlanceSegment, ...] = ()
    driving: tuple[DrivingSample, ...] = ()
    states: tuple[StateEvent, ...] = ()

    def __post_init__(self):
        if not self.trip_id:
            raise ValueError("empty trip id")
        if self.screen_w_px <= 0 or self.screen_h_px <= 0:
            raise ValueError("non-positive screen dimensions")
        _check_sorted("touch", [t.timestamp_ms for t in self.touches])
        _check_sorted("driving", [d.timestamp_ms for d in self.driving])
        _check_sorted("state", [s.timestamp_ms for s in self.states])
        _check_glance_contiguity(self.glances)
        for t in self.touches:
            for (sx, sy), (ex, ey) in t.fingers:
                for x, y in ((sx, sy), (ex, ey)):
                    if not (0 <= x <= self.screen_w_px
                            and 0 <= y <= self.screen_h_px):
                        raise ValueError(
                            f"touch at t={t.timestamp_ms} outside screen: "
                            f"({x}, {y})")
        if self.duration_ms() <= 0:
            raise ValueError("trip has no positive time extent")

    def duration_ms(self) -> int:
        """Largest timestamp seen on any stream (trips start at t=0)."""
        ends = [0]
        if self.touches:
            ends.append(self.touches[-1].timestamp_ms)
        if self.glances:
            ends.append(self.glances[-1].end_ms)
        if self.driving:
            ends.append(self.driving[-1].timestamp_ms)
        if self.states:
            ends.append(self.states[-1].timestamp_ms)
        return max(ends)


def _check_sorted(stream: str, ts: list[int]) -> None:
    for i in range(1, len(ts)):
        if ts[i] < ts[i - 1]:
            raise UnsortedTimestamps(
                f"{stream} stream goes backwards at index {i}: "
                f"{ts[i - 1]} -> {ts[i]}")


def _check_glance_contiguity(glances: tuple[RawGlanceSegment, ...]) -> None:
    for i in range(1, len(glances)):
        prev, cur = glances[i - 1], glances[i]
        if cur.start_ms != prev.end_ms:
            kind = "gap" if cur.start_ms > prev.end_ms else "overlap"
            raise UnsortedTimestamps(
                f"glance stream not contiguous at index {i}: "
                f"{kind} between end={prev.end_ms} and start={cur.start_ms}")


def validate_sampling(driving: Iterable[DrivingSample],
                      tolerance_ms: int = 50) -> bool:
    """True when every adjacent gap is within tolerance of the 4 Hz period.

    Streams with fewer than two samples have no gaps and pass trivially.
    """
    prev = None
    for s in driving:
        if prev is not None:
            gap = s.timestamp_ms - prev
            if abs(gap - DRIVING_PERIOD_MS) > tolerance_ms:
                return False
        prev = s.timestamp_ms
    return True


# ---------------------------------------------------------------------------
# JSON-lines dialect
# ---------------------------------------------------------------------------

_REQUIRED = {
    "header": ("trip_id", "screen_w_px", "screen_h_px"),
    "touch": ("timestamp_ms", "element_id", "element_type", "fingers"),
    "glance": ("start_ms", "end_ms", "target"),
    "driving": ("timestamp_ms", "speed_kmh"),
    "state": ("timestamp_ms", "state"),
}


def _parse_record(line_no: int, obj: dict) -> tuple[str, dict]:
    if not isinstance(obj, dict):
        raise MalformedRecord(line_no, "record is not an object")
    kind = obj.get("kind")
    if kind not in _REQUIRED:
        raise MalformedRecord(line_no, f"unknown record kind {kind!r}")
    missing = [f for f in _REQUIRED[kind] if f not in obj]
    if missing:
        raise MalformedRecord(
            line_no, f"{kind} record missing fields: {', '.join(missing)}")
    return kind, obj


def _coerce_fingers(line_no: int, raw) -> tuple:
    try:
        fingers = tuple(
            ((float(f[0][0]), float(f[0][1])), (float(f[1][0]), float(f[1][1])))
            for f in raw)
    except (TypeError, ValueError, IndexError):
        raise MalformedRecord(line_no, f"bad finger geometry: {raw!r}") from None
    if not fingers:
        raise MalformedRecord(line_no, "touch record with empty fingers list")
    return fingers


def iter_trip_records(path: str | Path) -> Iterator[tuple[int, str, dict]]:
    """Yield (line_no, kind, record) for every non-blank line in the file."""
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedRecord(line_no, f"invalid JSON ({e.msg})") from None
            kind, obj = _parse_record(line_no, obj)
            yield line_no, kind, obj


def ingest_trip(path: str | Path, format: str = "jsonl") -> TripLog:
    """Parse one trip-log file into a validated TripLog.

    Raises MalformedRecord (with the offending line number) for per-record
    problems, UnsortedTimestamps for stream-ordering violations. Speeds above
    the 210 km/h plausibility flag produce a warning but are kept; speeds
    above 250 km/h are rejected.
    """
    if format != "jsonl":
        raise ValueError(f"unknown trip-log format {format!r}")
    header: dict | None = None
    touches: list[TouchEvent] = []
    glances: list[RawGlanceSegment] = []
    driving: list[DrivingSample] = []
    states: list[StateEvent] = []
    flagged: list[int] = []
    folded: list[tuple[int, str]] = []

    for line_no, kind, obj in iter_trip_records(path):
        if header is None:
            if kind != "header":
                raise MalformedRecord(line_no, "first record must be the header")
            header = obj
            continue
        if kind == "header":
            raise MalformedRecord(line_no, "duplicate header record")
        try:
            if kind == "touch":
                canon = _canonical_element_type(obj["element_type"])
                if canon == "Unknown" and str(obj["element_type"]) != "Unknown":
                    folded.append((line_no, str(obj["element_type"])))
                touches.append(TouchEvent(
                    timestamp_ms=int(obj["timestamp_ms"]),
                    element_id=str(obj["element_id"]),
                    element_type=canon,
                    fingers=_coerce_fingers(line_no, obj["fingers"]),
                ))
            elif kind == "glance":
                glances.append(RawGlanceSegment(
                    start_ms=int(obj["start_ms"]),
                    end_ms=int(obj["end_ms"]),
                    target=str(obj["target"]),
                ))
            elif kind == "driving":
                speed = float(obj["speed_kmh"])
                if speed > SPEED_FLAG_KMH and speed <= SPEED_REJECT_KMH:
                    flagged.append(line_no)
                driving.append(DrivingSample(
                    timestamp_ms=int(obj["timestamp_ms"]), speed_kmh=speed,
                    steering_deg=float(obj.get("steering_deg", 0.0))))
            elif kind == "state":
                states.append(StateEvent(
                    timestamp_ms=int(obj["timestamp_ms"]),
                    kind=str(obj["state"])))
        except MalformedRecord:
            raise
        except (ValueError, TypeError) as e:
            raise MalformedRecord(line_no, str(e)) from None

    if header is None:
        raise MalformedRecord(1, "empty file: no header record")
    if flagged:
        warnings.warn(
            f"{len(flagged)} driving sample(s) above {SPEED_FLAG_KMH} km/h "
            f"(lines {flagged[:5]}{'...' if len(flagged) > 5 else ''})",
            stacklevel=2)
    if folded:
        shown = ", ".join(f"{t!r} (line {ln})" for ln, t in folded[:5])
        warnings.warn(
            f"{len(folded)} touch record(s) with unrecognized element types "
            f"folded to Unknown: {shown}"
            f"{'...' if len(folded) > 5 else ''}",
            stacklevel=2)
    try:
        return TripLog(
            trip_id=str(header["trip_id"]),
            screen_w_px=float(header["screen_w_px"]),
            screen_h_px=float(header["screen_h_px"]),
            touches=tuple(touches),
            glances=tuple(glances),
            driving=tuple(driving),
            states=tuple(states),
        )
    except UnsortedTimestamps:
        raise
    except ValueError as e:
        raise MalformedRecord(1, f"trip-level validation failed: {e}") from None


def _canonical_element_type(raw: object) -> str:
    """Map an element-type string onto the canonical enum; unknowns fold to
    "Unknown" rather than erroring (logs from newer UI builds may carry types
    this pipeline has never heard of)."""
    s = str(raw)
    if s in ELEMENT_TYPES:
        return s
    lowered = {e.lower(): e for e in ELEMENT_TYPES}
    return lowered.get(s.lower(), "Unknown")


def trip_to_records(trip: TripLog) -> Iterator[dict]:
    """The inverse of ingest: a stream of JSON-able record dicts."""
    yield {
        "kind": "header",
        "trip_id": trip.trip_id,
        "screen_w_px": trip.screen_w_px,
        "screen_h_px": trip.screen_h_px,
    }
    for t in trip.touches:
        yield {
            "kind": "touch",
            "timestamp_ms": t.timestamp_ms,
            "element_id": t.element_id,
            "element_type": t.element_type,
            "fingers": [[[sx, sy], [ex, ey]] for (sx, sy), (ex, ey) in t.fingers],
        }
    for g in trip.glances:
        yield {"kind": "glance", "start_ms": g.start_ms, "end_ms": g.end_ms,
               "target": g.target}
    for d in trip.driving:
        yield {"kind": "driving", "timestamp_ms": d.timestamp_ms,
               "speed_kmh": d.speed_kmh, "steering_deg": d.steering_deg}
    for s in trip.states:
        yield {"kind": "state", "timestamp_ms": s.timestamp_ms, "state": s.kind}


def write_trip(trip: TripLog, path: str | Path, format: str = "jsonl") -> None:
    """Serialize a trip; ingest(write(trip)) reproduces it exactly."""
    if format != "jsonl":
        raise ValueError(f"unknown trip-log format {format!r}")
    with open(path, "w", encoding="utf-8") as fh:
        for rec in trip_to_records(trip):
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
