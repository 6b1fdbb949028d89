"""Sessionization of touch streams into secondary-task engagements.

A secondary-task engagement is a burst of touchscreen interactions plus the
driving context around it and the glances that overlap it. The splitting rule
is a maximum inter-touch gap: two consecutive touches more than `max_gap_ms`
apart belong to different sequences. A gap exactly equal to the bound stays
within one sequence.

Driving context comes from a buffered window that is open on both sides,
t(first) - buffer < t < t(last) + buffer. Glance attachment, by contrast,
uses the bare interaction span [t(first), t(last)]: every glance segment
whose interval overlaps that closed span is attached whole — fragmented
boundary glances are never clipped, and a glance spanning the entire span
comes back uncut.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

from .telemetry import (
    DrivingSample,
    RawGlanceSegment,
    StateEvent,
    TouchEvent,
    TripLog,
    validate_sampling,
)

DEFAULT_MAX_GAP_MS = 10_000
DEFAULT_BUFFER_MS = 2_000


class SegmentationError(Exception):
    pass


class EmptyWindow(SegmentationError):
    """No driving samples fall inside a sequence's buffered window."""


@dataclass(frozen=True)
class InteractionSequence:
    """A maximal run of touches with every adjacent gap <= the bound."""

    interactions: tuple[TouchEvent, ...]

    def __post_init__(self):
        if not self.interactions:
            raise ValueError("empty interaction sequence")

    @property
    def n(self) -> int:
        return len(self.interactions)

    @property
    def start_ms(self) -> int:
        return self.interactions[0].timestamp_ms

    @property
    def end_ms(self) -> int:
        return self.interactions[-1].timestamp_ms


@dataclass(frozen=True)
class DrivingSequence:
    """Driving samples strictly inside the buffered window, plus the
    driving-automation flags in effect when the engagement began."""

    samples: tuple[DrivingSample, ...]
    acc_active: bool
    sa_active: bool
    lo_ms: int
    hi_ms: int


@dataclass(frozen=True)
class GlanceSequence:
    """Glance segments overlapping the interaction span, kept whole."""

    glances: tuple[RawGlanceSegment, ...]


@dataclass(frozen=True)
class SecondaryTaskEngagement:
    trip_id: str
    interaction_seq: InteractionSequence
    glance_seq: GlanceSequence
    driving_seq: DrivingSequence
    passenger_present: bool


@dataclass
class DropStats:
    """Intersection bookkeeping: sequences kept vs dropped and why."""

    kept: int = 0
    missing_driving: int = 0
    irregular_sampling: int = 0
    missing_glances: int = 0

    def as_dict(self) -> dict[str, int]:
        return {
            "kept": self.kept,
            "missing_driving": self.missing_driving,
            "irregular_sampling": self.irregular_sampling,
            "missing_glances": self.missing_glances,
        }


def segment_interactions(
    touches: tuple[TouchEvent, ...] | list[TouchEvent],
    max_gap_ms: int = DEFAULT_MAX_GAP_MS,
) -> list[InteractionSequence]:
    """Split a sorted touch stream on gaps strictly greater than the bound.

    The output is a partition: concatenating the sequences reproduces the
    input. Empty input gives an empty list.
    """
    if max_gap_ms <= 0:
        raise ValueError(f"non-positive gap bound {max_gap_ms}")
    sequences: list[InteractionSequence] = []
    run: list[TouchEvent] = []
    for t in touches:
        if run and t.timestamp_ms - run[-1].timestamp_ms > max_gap_ms:
            sequences.append(InteractionSequence(tuple(run)))
            run = []
        run.append(t)
    if run:
        sequences.append(InteractionSequence(tuple(run)))
    return sequences


def _flag_at(states: tuple[StateEvent, ...], t: int,
             on_kind: str, off_kind: str) -> bool:
    """State of a toggle pair at time t: latest event at or before t wins;
    no prior event means off."""
    flag = False
    for s in states:
        if s.timestamp_ms > t:
            break
        if s.kind == on_kind:
            flag = True
        elif s.kind == off_kind:
            flag = False
    return flag


def window_driving(
    driving: tuple[DrivingSample, ...] | list[DrivingSample],
    seq: InteractionSequence,
    buffer_ms: int = DEFAULT_BUFFER_MS,
    states: tuple[StateEvent, ...] = (),
) -> DrivingSequence:
    """Collect driving samples strictly inside the buffered window.

    Bounds are exclusive on both sides; a sample exactly on an edge is out.
    Raises EmptyWindow when nothing falls inside. ACC / steering-assist flags
    reflect the latest state event at or before the first interaction; a
    toggle later in the window emits a warning but does not change the flags.
    """
    lo = seq.start_ms - buffer_ms
    hi = seq.end_ms + buffer_ms
    inside = tuple(d for d in driving if lo < d.timestamp_ms < hi)
    if not inside:
        raise EmptyWindow(
            f"no driving samples in ({lo}, {hi}) for sequence at "
            f"{seq.start_ms}")
    acc = _flag_at(states, seq.start_ms, "acc_active", "acc_inactive")
    sa = _flag_at(states, seq.start_ms, "sa_active", "sa_inactive")
    late_toggles = [
        s for s in states
        if seq.start_ms < s.timestamp_ms < hi
        and s.kind in ("acc_active", "acc_inactive",
                       "sa_active", "sa_inactive")]
    if late_toggles:
        warnings.warn(
            f"controller toggled {len(late_toggles)}x inside window "
            f"({lo}, {hi}); flags keep the engagement-start state",
            stacklevel=2)
    return DrivingSequence(samples=inside, acc_active=acc, sa_active=sa,
                           lo_ms=lo, hi_ms=hi)


def attach_glances(
    glances: tuple[RawGlanceSegment, ...] | list[RawGlanceSegment],
    seq: InteractionSequence,
) -> GlanceSequence:
    """Attach every glance segment overlapping [t(first), t(last)].

    Overlap is closed-interval: a segment touching the span only at an
    endpoint is attached, and segments always come back whole, so a glance
    that brackets the entire span is included at full duration.
    """
    lo, hi = seq.start_ms, seq.end_ms
    return GlanceSequence(glances=tuple(
        g for g in glances if g.end_ms >= lo and g.start_ms <= hi))


def _passenger_present(states: tuple[StateEvent, ...], lo: int, hi: int) -> bool:
    """Belted passenger at any point of the window [lo, hi]."""
    if _flag_at(states, lo, "passenger_belt_on", "passenger_belt_off"):
        return True
    return any(s.kind == "passenger_belt_on" and lo < s.timestamp_ms <= hi
               for s in states)


def assemble_engagements(
    trip: TripLog,
    max_gap_ms: int = DEFAULT_MAX_GAP_MS,
    buffer_ms: int = DEFAULT_BUFFER_MS,
    sampling_tolerance_ms: int = 50,
) -> tuple[list[SecondaryTaskEngagement], DropStats]:
    """Sessionize one trip and intersect the three data sources.

    Sequences whose window has no driving samples, fails the 4 Hz cadence
    check, or attaches no glances are dropped and counted in DropStats.
    """
    stats = DropStats()
    out: list[SecondaryTaskEngagement] = []
    for seq in segment_interactions(trip.touches, max_gap_ms):
        try:
            win = window_driving(trip.driving, seq, buffer_ms, trip.states)
        except EmptyWindow:
            stats.missing_driving += 1
            continue
        if not validate_sampling(win.samples, sampling_tolerance_ms):
            stats.irregular_sampling += 1
            continue
        gw = attach_glances(trip.glances, seq)
        if not gw.glances:
            stats.missing_glances += 1
            continue
        out.append(SecondaryTaskEngagement(
            trip_id=trip.trip_id,
            interaction_seq=seq,
            glance_seq=gw,
            driving_seq=win,
            passenger_present=_passenger_present(
                trip.states, win.lo_ms, win.hi_ms),
        ))
        stats.kept += 1
    return out, stats
