"""Glance-stream cleaning and per-engagement glance metrics.

Raw eye-tracker output is noisy: areas of interest come in vendor-specific
codes, tracking drops out for a few frames, blinks register as closed eyes,
and single-frame flickers produce glances far too short to be real. The
filter here rewrites a contiguous segment stream with a small set of rules:

1. aggregation  — vendor AOI codes collapse onto five canonical targets
                  (on road, off road, center stack, tracking loss, eyes
                  closed); mirrors, cluster, side windows etc. are all
                  off-road.
2. merge        — adjacent segments with equal targets fuse.
3. bridging     — tracking loss shorter than 300 ms flanked by the same
                  target on both sides takes that target.
4. micro-glance — any real glance shorter than 120 ms is absorbed into its
                  neighbours.
5. short loss   — tracking loss shorter than 120 ms between two different
                  targets is split between them.
6. blink        — eyes-closed runs shorter than 500 ms are absorbed.

Absorption gives the whole segment to a lone neighbour, relabels when both
flanks agree, and otherwise splits at the midpoint (the left neighbour takes
the floor half). The rule sequence is iterated to a fixpoint because one
rewrite can expose another (a midpoint split can leave a tracking-loss run
newly flanked by equal targets). Every rewrite conserves total covered time
exactly and strictly reduces the segment count, so iteration terminates and
the result is idempotent under re-filtering.
"""
from __future__ import annotations

from dataclasses import dataclass

from .telemetry import (
    CENTER_STACK,
    EYES_CLOSED,
    OFF_ROAD,
    ON_ROAD,
    TRACKING_LOSS,
    RawGlanceSegment,
    UnsortedTimestamps,
)

TRACKING_LOSS_BRIDGE_MS = 300
MIN_GLANCE_MS = 120
BLINK_MS = 500
LONG_GLANCE_MS = 2_000

# Vendor AOI codes seen in the wild, canonicalized. Unknown codes mean the
# driver was looking *somewhere* that is not the road, so they fold to
# off-road rather than erroring.
_AOI_TABLE = {
    "on_road": ON_ROAD,
    "road": ON_ROAD,
    "windshield": ON_ROAD,
    "forward": ON_ROAD,
    "center_stack": CENTER_STACK,
    "center_display": CENTER_STACK,
    "center_screen": CENTER_STACK,
    "head_unit": CENTER_STACK,
    "cid": CENTER_STACK,
    "tracking_loss": TRACKING_LOSS,
    "no_tracking": TRACKING_LOSS,
    "lost": TRACKING_LOSS,
    "eyes_closed": EYES_CLOSED,
    "lid_closure": EYES_CLOSED,
    "blink": EYES_CLOSED,
}


def aggregate_aoi_code(raw: str) -> str:
    """Canonical target for a raw AOI code (off-road for anything unknown)."""
    key = raw.strip().lower().replace("-", "_").replace(" ", "_")
    return _AOI_TABLE.get(key, OFF_ROAD)


def aggregate_aoi(seg: RawGlanceSegment) -> RawGlanceSegment:
    target = aggregate_aoi_code(seg.target)
    if target == seg.target:
        return seg
    return RawGlanceSegment(seg.start_ms, seg.end_ms, target)


def _is_real_glance(aoi: str) -> bool:
    return aoi not in (TRACKING_LOSS, EYES_CLOSED)


def _merge(segs: list[list]) -> bool:
    """Fuse adjacent equal-target segments in place. True if anything fused."""
    changed = False
    i = 1
    while i < len(segs):
        if segs[i][2] == segs[i - 1][2]:
            segs[i - 1][1] = segs[i][1]
            del segs[i]
            changed = True
        else:
            i += 1
    return changed


def _absorb(segs: list[list], i: int) -> bool:
    """Give segment i's time to its neighbours. False when it has none."""
    left = segs[i - 1] if i > 0 else None
    right = segs[i + 1] if i + 1 < len(segs) else None
    if left is None and right is None:
        return False
    if left is None:
        right[0] = segs[i][0]
    elif right is None or left[2] == right[2]:
        left[1] = segs[i][1]
    else:
        mid = segs[i][0] + (segs[i][1] - segs[i][0]) // 2
        left[1] = mid
        right[0] = mid
    del segs[i]
    return True


def _apply_rule(segs: list[list], matches) -> bool:
    """Absorb every segment matching the predicate; restart after each hit
    because absorption shifts indices and can change neighbour targets."""
    changed = False
    i = 0
    while i < len(segs):
        if matches(segs, i) and _absorb(segs, i):
            changed = True
            _merge(segs)
            i = 0
        else:
            i += 1
    return changed


def filter_glances(
    segments: list[RawGlanceSegment] | tuple[RawGlanceSegment, ...],
    tracking_loss_bridge_ms: int = TRACKING_LOSS_BRIDGE_MS,
    min_glance_ms: int = MIN_GLANCE_MS,
    blink_ms: int = BLINK_MS,
) -> list[RawGlanceSegment]:
    """Clean a contiguous, AOI-aggregated glance stream.

    Returns a new contiguous stream covering exactly the same time span.
    Filtering an already-filtered stream is a no-op.
    """
    for a, b in zip(segments, segments[1:]):
        if b.start_ms != a.end_ms:
            raise UnsortedTimestamps(
                f"glance stream not contiguous at {a.end_ms} -> {b.start_ms}")

    segs = [[s.start_ms, s.end_ms, s.target] for s in segments]
    _merge(segs)

    def bridging(ss, i):
        s = ss[i]
        return (s[2] == TRACKING_LOSS
                and s[1] - s[0] < tracking_loss_bridge_ms
                and 0 < i < len(ss) - 1
                and ss[i - 1][2] == ss[i + 1][2])

    def micro_glance(ss, i):
        s = ss[i]
        return _is_real_glance(s[2]) and s[1] - s[0] < min_glance_ms

    def short_loss(ss, i):
        s = ss[i]
        return s[2] == TRACKING_LOSS and s[1] - s[0] < min_glance_ms

    def blink_rule(ss, i):
        s = ss[i]
        return s[2] == EYES_CLOSED and s[1] - s[0] < blink_ms

    changed = True
    while changed:
        changed = False
        for rule in (bridging, micro_glance, short_loss, blink_rule):
            changed |= _apply_rule(segs, rule)

    return [RawGlanceSegment(s[0], s[1], s[2]) for s in segs]


@dataclass(frozen=True)
class GlanceMetrics:
    """Center-stack glance summary for one engagement."""

    tgd_ms: int
    n_glances: int
    n_long_glances: int
    mean_glance_ms: float
    has_long_glance: bool


def glance_metrics(
    segments: list[RawGlanceSegment] | tuple[RawGlanceSegment, ...],
    long_glance_ms: int = LONG_GLANCE_MS,
) -> GlanceMetrics:
    """Total glance duration and long-glance flags over center-stack glances.

    A long glance is strictly longer than the threshold; the total is the sum
    of center-stack segment durations in integer milliseconds.
    """
    durations = [s.duration_ms for s in segments if s.target == CENTER_STACK]
    tgd = sum(durations)
    n_long = sum(1 for d in durations if d > long_glance_ms)
    return GlanceMetrics(
        tgd_ms=tgd,
        n_glances=len(durations),
        n_long_glances=n_long,
        mean_glance_ms=tgd / len(durations) if durations else 0.0,
        has_long_glance=n_long > 0,
    )
