"""
From raw telemetry to one labeled engagement
============================================

One hand-written trip pushed through every pipeline stage, a call at a time:
sessionization on touch gaps, the buffered driving window, glance attachment,
the six-rule glance filter, and finally the 25-column feature row with its
two labels.
"""
import numpy as np

from glancelab.telemetry import (TripLog, TouchEvent, RawGlanceSegment,
                                 DrivingSample, StateEvent)
from glancelab.segmentation import (segment_interactions, window_driving,
                                    attach_glances, assemble_engagements)
from glancelab.glance_pipeline import (aggregate_aoi, filter_glances,
                                       glance_metrics)
from glancelab.features import FEATURE_NAMES, label_engagement


def tap(t, element):
    return TouchEvent(t, "el-1", element, (((400.0, 300.0), (400.0, 300.0)),))


# ---------------------------------------------------------------------------
# 1. A trip with two bursts of touchscreen activity, 18 s apart.
#
# The glance stream is deliberately messy: vendor AOI codes ("cid", "road"),
# a 200 ms tracking dropout in the middle of a center-stack look, a 90 ms
# micro glance, and a 300 ms blink.
# ---------------------------------------------------------------------------
touches = (
    tap(20_000, "List"), tap(21_500, "List"), tap(24_000, "Button"),
    tap(27_000, "Homebar"),
    # 18 s of silence: strictly more than the 10 s bound -> a new engagement
    tap(45_000, "Map"),
)
glances = (
    RawGlanceSegment(17_000, 19_500, "road"),
    RawGlanceSegment(19_500, 21_200, "cid"),
    RawGlanceSegment(21_200, 21_400, "no_tracking"),   # dropout, 200 ms
    RawGlanceSegment(21_400, 23_000, "cid"),
    RawGlanceSegment(23_000, 23_090, "road"),          # micro glance, 90 ms
    RawGlanceSegment(23_090, 24_800, "cid"),
    RawGlanceSegment(24_800, 25_100, "blink"),         # 300 ms lid closure
    RawGlanceSegment(25_100, 46_000, "road"),
)
driving = tuple(DrivingSample(15_000 + 250 * i, 62.0 + 0.05 * i, -1.0 + 0.02 * i)
                for i in range(140))
states = (StateEvent(1_000, "acc_active"),)

trip = TripLog(trip_id="demo-trip", screen_w_px=1280, screen_h_px=720,
               touches=touches, glances=glances, driving=driving,
               states=states)

# ---------------------------------------------------------------------------
# 2. Sessionize: split the touch stream on gaps > 10 000 ms.
# ---------------------------------------------------------------------------
sequences = segment_interactions(trip.touches)
print(f"{len(sequences)} interaction sequences:")
for seq in sequences:
    print(f"  [{seq.start_ms:>6} .. {seq.end_ms:>6}] ms, {seq.n} touches")

# ---------------------------------------------------------------------------
# 3. The driving window is the span +/- 2 s, endpoints excluded; the ACC/SA
#    flags are whatever was in effect at the first touch.
# ---------------------------------------------------------------------------
seq = sequences[0]
window = window_driving(trip.driving, seq, buffer_ms=2_000, states=trip.states)
print(f"\ndriving window ({window.lo_ms}, {window.hi_ms}) ms exclusive: "
      f"{len(window.samples)} samples, acc={window.acc_active}, "
      f"sa={window.sa_active}")
print(f"mean speed {np.mean([s.speed_kmh for s in window.samples]):.1f} km/h")

# ---------------------------------------------------------------------------
# 4. Attach every glance overlapping the bare touch span, kept whole: the
#    closed-interval test keeps the road glance that merely brackets the end.
# ---------------------------------------------------------------------------
attached = attach_glances(trip.glances, seq).glances
print(f"\n{len(attached)} glances attached to [{seq.start_ms}, {seq.end_ms}]:")
for g in attached:
    print(f"  [{g.start_ms:>6} .. {g.end_ms:>6}] {g.target}")

# ---------------------------------------------------------------------------
# 5. Aggregate vendor AOI codes, then filter to a fixpoint. The dropout is
#    bridged into its center-stack flanks, the micro glance and the blink are
#    absorbed -- total timeline duration is untouched.
# ---------------------------------------------------------------------------
cleaned = filter_glances([aggregate_aoi(g) for g in attached])
print("\nafter filtering:")
for g in cleaned:
    print(f"  [{g.start_ms:>6} .. {g.end_ms:>6}] {g.target:>12} "
          f"({g.duration_ms} ms)")
before = sum(g.duration_ms for g in attached)
after = sum(g.duration_ms for g in cleaned)
print(f"duration conserved: {before} ms -> {after} ms")

metrics = glance_metrics(cleaned)
print(f"\ntotal glance duration {metrics.tgd_ms} ms over "
      f"{metrics.n_glances} center-stack glances; "
      f"long glance present: {metrics.has_long_glance}")

# ---------------------------------------------------------------------------
# 6. The same thing end to end: engagements -> 25 features + 2 labels.
# ---------------------------------------------------------------------------
engagements, drops = assemble_engagements(trip)
print(f"\nassemble_engagements kept {drops.kept}, dropped "
      f"{drops.missing_driving + drops.irregular_sampling + drops.missing_glances}")
row = label_engagement(engagements[0])
print(f"labels: tgd_ms={row.tgd_ms}, long_glance={row.long_glance}")
print("non-zero features:")
for name, value in zip(FEATURE_NAMES, row.features.values):
    if value != 0.0:
        print(f"  {name:>12} = {value:g}")
