"""Synthetic trip generator with planted, exactly-known glance behavior.

Every generated trip satisfies all telemetry invariants (contiguous glances,
4 Hz driving, sorted streams) and comes with per-session ground truth. The
planted relationship is

    TGD = alpha_n * N + beta_v * v_avg + gamma_list * n_List
          + delta_home * n_Homebar + noise(sigma)

where v_avg is the realized mean speed over the session's buffered driving
window, so with sigma = 0 the pipeline must recover the planted value to
rounding (the center-stack glances are constructed to sum to it exactly).
Glance durations follow a log-normal-ish split with a mode near one second;
speed follows a mean-reverting random walk clipped to a plausible band.

Determinism: one generator seeded per trip, drawn in a fixed order — the same
(spec, seed) produces a byte-identical trip log.

Geometry of a session: interactions are placed with intra-session gaps below
the sessionization bound and inter-session gaps above it; the session's
center-stack glances live in a block of alternating center-stack / on-road
segments placed inside (or slightly overhanging) the interaction span, with
the overhang bounded so every center-stack piece still overlaps the span and
stays far away from neighboring sessions. Single-interaction sessions get one
center-stack glance bracketing their only touch timestamp. When a drawn
duration cannot fit the feasible span the noise contribution is clamped and
the ground truth records the clamped value; an infeasible *noiseless* target
raises InfeasibleSpec instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .telemetry import (
    CENTER_STACK,
    DRIVING_PERIOD_MS,
    ON_ROAD,
    DrivingSample,
    RawGlanceSegment,
    StateEvent,
    TouchEvent,
    TripLog,
)

MIN_PIECE_MS = 120        # shortest glance that survives filtering
FILLER_MS = 300           # on-road separator inside a session block
MAX_SINGLE_GLANCE_MS = 8_000
OVERHANG_CAP_MS = 4_000   # block overhang allowed past the interaction span
LONG_MS = 2_000


class InfeasibleSpec(Exception):
    """The noiseless planted duration cannot fit any feasible session."""


def _sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(-z))


@dataclass(frozen=True)
class GeneratorSpec:
    """Knobs for the synthetic fleet; defaults give a mixed, feasible corpus."""

    sessions_per_trip: int = 12
    n_range: tuple[int, int] = (1, 12)
    element_mix: tuple[tuple[str, float], ...] = (
        ("List", 0.25), ("Button", 0.20), ("Homebar", 0.15), ("Map", 0.10),
        ("Tab", 0.10), ("AppIcon", 0.10), ("Slider", 0.05), ("Other", 0.05),
    )
    drag_prob: float = 0.15
    multitouch_prob: float = 0.05
    # planted effect (milliseconds)
    alpha_n_ms: float = 800.0
    beta_v_ms_per_kmh: float = 4.0
    gamma_list_ms: float = 400.0
    delta_home_ms: float = -150.0
    noise_sigma_ms: float = 0.0
    tgd_floor_ms: int = 150
    # long-glance planting logit: bias + n_coef * N
    long_bias: float = -2.0
    long_n_coef: float = 0.25
    # driving regime
    speed_mean_kmh: float = 90.0
    speed_sd_kmh: float = 16.0
    speed_reversion: float = 0.04
    speed_min_kmh: float = 1.0
    speed_max_kmh: float = 209.0
    steering_sd_deg: float = 4.0
    acc_prob: float = 0.35
    sa_prob: float = 0.20
    passenger_prob: float = 0.0
    screen_w_px: float = 1920.0
    screen_h_px: float = 720.0

    def __post_init__(self):
        if self.noise_sigma_ms < 0:
            raise ValueError("noise sigma must be >= 0")
        total = sum(p for _, p in self.element_mix)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"element mix sums to {total}, expected 1")
        lo, hi = self.n_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad interaction-count range {self.n_range}")
        if self.sessions_per_trip < 1:
            raise ValueError("need at least one session per trip")
        if self.tgd_floor_ms < MIN_PIECE_MS:
            raise ValueError(
                f"tgd floor below the {MIN_PIECE_MS} ms filter threshold")
        for name, p in (("drag", self.drag_prob),
                        ("multitouch", self.multitouch_prob),
                        ("acc", self.acc_prob), ("sa", self.sa_prob),
                        ("passenger", self.passenger_prob)):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name} probability outside [0, 1]")
        if not 0.1 < self.speed_min_kmh <= self.speed_mean_kmh \
                <= self.speed_max_kmh <= 209.9:
            raise ValueError("speed band must satisfy "
                             "0.1 < min <= mean <= max <= 209.9")


@dataclass(frozen=True)
class SessionTruth:
    """What was planted for one session (realized values, post-clamping)."""

    trip_id: str
    session_index: int
    t_first_ms: int
    t_last_ms: int
    n: int
    n_list: int
    n_homebar: int
    v_avg_kmh: float
    tgd_planted_ms: int
    noiseless_tgd_ms: float
    long_planted: bool
    p_long: float
    acc_active: bool
    sa_active: bool
    passenger_present: bool
    n_pieces: int


def _bounded_int_split(total: int, k: int, lo: int, hi: int,
                       rng: np.random.Generator) -> list[int]:
    """Split `total` into k integers in [lo, hi] summing exactly to total,
    with log-normal-ish proportions (requires k*lo <= total <= k*hi)."""
    if k == 1:
        return [total]
    w = rng.lognormal(0.0, 0.45, size=k)
    raw = w / w.sum() * total
    pieces = np.floor(raw).astype(np.int64)
    short = total - int(pieces.sum())
    order = np.argsort(-(raw - pieces), kind="stable")
    pieces[order[:short]] += 1
    pieces = np.clip(pieces, lo, hi)
    diff = total - int(pieces.sum())
    while diff != 0:
        moved = False
        for j in range(k):
            if diff > 0 and pieces[j] < hi:
                step = min(diff, hi - int(pieces[j]))
                pieces[j] += step
                diff -= step
                moved = True
            elif diff < 0 and pieces[j] > lo:
                step = min(-diff, int(pieces[j]) - lo)
                pieces[j] -= step
                diff += step
                moved = True
            if diff == 0:
                break
        if not moved:
            raise InfeasibleSpec(
                f"cannot split {total} into {k} pieces within [{lo}, {hi}]")
    return [int(p) for p in pieces]


def _plan_pieces(tgd: int, long_planted: bool,
                 rng: np.random.Generator) -> list[int]:
    """Center-stack piece durations summing exactly to tgd.

    Without a long glance every piece stays in [120, 2000]; with one, a
    single piece exceeds 2000 and the remainder is split normally.
    """
    if long_planted and tgd > LONG_MS + MIN_PIECE_MS:
        big = min(max(LONG_MS + 100, int(round(tgd * 0.6))),
                  MAX_SINGLE_GLANCE_MS, tgd)
        rest = tgd - big
        if rest == 0:
            return [big]
        if rest < MIN_PIECE_MS:
            return [tgd] if tgd <= MAX_SINGLE_GLANCE_MS else [
                MAX_SINGLE_GLANCE_MS, tgd - MAX_SINGLE_GLANCE_MS]
        k_rest = max(math.ceil(rest / LONG_MS),
                     min(max(1, round(rest / 1000)), rest // MIN_PIECE_MS))
        return [big] + _bounded_int_split(rest, k_rest, MIN_PIECE_MS, LONG_MS,
                                          rng)
    k = max(math.ceil(tgd / LONG_MS),
            min(max(1, round(tgd / 1000)), tgd // MIN_PIECE_MS))
    return _bounded_int_split(tgd, k, MIN_PIECE_MS, LONG_MS, rng)


def _simulate_driving(duration_ms: int, spec: GeneratorSpec,
                      rng: np.random.Generator
                      ) -> tuple[DrivingSample, ...]:
    n = duration_ms // DRIVING_PERIOD_MS + 1
    speeds = np.empty(n)
    angles = np.empty(n)
    v = float(np.clip(rng.normal(spec.speed_mean_kmh, spec.speed_sd_kmh),
                      spec.speed_min_kmh, spec.speed_max_kmh))
    a = 0.0
    noise_v = rng.normal(0.0, 1.0, size=n)
    noise_a = rng.normal(0.0, 1.0, size=n)
    for i in range(n):
        v += spec.speed_reversion * (spec.speed_mean_kmh - v) \
            + spec.speed_sd_kmh * 0.05 * noise_v[i]
        v = float(np.clip(v, spec.speed_min_kmh, spec.speed_max_kmh))
        a += 0.2 * (0.0 - a) + spec.steering_sd_deg * 0.3 * noise_a[i]
        speeds[i] = v
        angles[i] = a
    return tuple(
        DrivingSample(timestamp_ms=i * DRIVING_PERIOD_MS,
                      speed_kmh=float(speeds[i]),
                      steering_deg=float(round(angles[i], 3)))
        for i in range(n))


def _window_mean_speed(ts: np.ndarray, speeds: np.ndarray,
                       lo: int, hi: int) -> float:
    i = int(np.searchsorted(ts, lo, side="right"))
    j = int(np.searchsorted(ts, hi, side="left"))
    return float(speeds[i:j].mean())


@dataclass
class _SessionPlan:
    touch_times: list[int]
    elements: list[str]
    acc: bool
    sa: bool
    passenger: bool

    @property
    def t_first(self) -> int:
        return self.touch_times[0]

    @property
    def t_last(self) -> int:
        return self.touch_times[-1]


def _plan_sessions(spec: GeneratorSpec, rng: np.random.Generator
                   ) -> list[_SessionPlan]:
    plans: list[_SessionPlan] = []
    cursor = 15_000
    names = [n for n, _ in spec.element_mix]
    probs = np.asarray([p for _, p in spec.element_mix])
    probs = probs / probs.sum()
    for _ in range(spec.sessions_per_trip):
        n = int(rng.integers(spec.n_range[0], spec.n_range[1] + 1))
        gaps = rng.integers(800, 6001, size=max(n - 1, 0))
        times = [cursor]
        for g in gaps:
            times.append(times[-1] + int(g))
        elements = [names[int(i)] for i in
                    rng.choice(len(names), size=n, p=probs)]
        plans.append(_SessionPlan(
            touch_times=times,
            elements=elements,
            acc=bool(rng.random() < spec.acc_prob),
            sa=bool(rng.random() < spec.sa_prob),
            passenger=bool(rng.random() < spec.passenger_prob),
        ))
        cursor = times[-1] + 12_000 + int(rng.integers(0, 8_000))
    return plans


def _make_touch(t: int, element: str, spec: GeneratorSpec,
                rng: np.random.Generator) -> TouchEvent:
    w, h = spec.screen_w_px, spec.screen_h_px
    x = float(rng.uniform(40, w - 40))
    y = float(rng.uniform(40, h - 40))
    u = rng.random()
    if u < spec.multitouch_prob:
        x2 = float(np.clip(x + rng.uniform(-200, 200), 0, w))
        y2 = float(np.clip(y + rng.uniform(-150, 150), 0, h))
        fingers = (((x, y), (x, y)), ((x2, y2), (x2, y2)))
    elif u < spec.multitouch_prob + spec.drag_prob:
        ex = float(np.clip(x + rng.uniform(30, 300) * rng.choice((-1, 1)), 0, w))
        ey = float(np.clip(y + rng.uniform(-60, 60), 0, h))
        fingers = (((x, y), (ex, ey)),)
    else:
        fingers = (((x, y), (x, y)),)
    return TouchEvent(timestamp_ms=t, element_id=f"el{int(rng.integers(100))}",
                      element_type=element, fingers=fingers)


def generate_trip(spec: GeneratorSpec, seed: int, trip_id: str | None = None
                  ) -> tuple[TripLog, list[SessionTruth]]:
    """One synthetic trip plus its per-session ground truth."""
    rng = np.random.default_rng(seed)
    trip_id = trip_id or f"synth-{seed}"
    plans = _plan_sessions(spec, rng)
    trip_end = plans[-1].t_last + 6_000
    driving = _simulate_driving(trip_end, spec, rng)
    drive_ts = np.asarray([d.timestamp_ms for d in driving])
    drive_kmh = np.asarray([d.speed_kmh for d in driving])

    touches: list[TouchEvent] = []
    states: list[StateEvent] = []
    truths: list[SessionTruth] = []
    # glance blocks to stitch into a contiguous timeline afterwards:
    # (block_start, [(duration, aoi), ...])
    blocks: list[tuple[int, list[tuple[int, str]]]] = []

    for si, plan in enumerate(plans):
        t1, tn = plan.t_first, plan.t_last
        for t, el in zip(plan.touch_times, plan.elements):
            touches.append(_make_touch(t, el, spec, rng))
        states.append(StateEvent(t1 - 2_500,
                                 "acc_active" if plan.acc else "acc_inactive"))
        states.append(StateEvent(t1 - 2_500,
                                 "sa_active" if plan.sa else "sa_inactive"))
        if plan.passenger:
            states.append(StateEvent(t1 - 2_500, "passenger_belt_on"))
            states.append(StateEvent(tn + 2_500, "passenger_belt_off"))

        n = len(plan.touch_times)
        n_list = plan.elements.count("List")
        n_home = plan.elements.count("Homebar")
        v_avg = _window_mean_speed(drive_ts, drive_kmh,
                                   t1 - 2_000, tn + 2_000)
        noiseless = (spec.alpha_n_ms * n
                     + spec.beta_v_ms_per_kmh * v_avg
                     + spec.gamma_list_ms * n_list
                     + spec.delta_home_ms * n_home)
        noise = rng.normal(0.0, spec.noise_sigma_ms) \
            if spec.noise_sigma_ms > 0 else 0.0
        tgd = max(spec.tgd_floor_ms, int(round(noiseless + noise)))

        p_long = _sigmoid(spec.long_bias + spec.long_n_coef * n)
        want_long = bool(rng.random() < p_long)

        if n == 1:
            if noiseless > MAX_SINGLE_GLANCE_MS:
                raise InfeasibleSpec(
                    f"noiseless duration {noiseless:.0f} ms cannot fit a "
                    f"single-interaction session (cap "
                    f"{MAX_SINGLE_GLANCE_MS} ms)")
            tgd = min(tgd, MAX_SINGLE_GLANCE_MS)
            pieces = [tgd]
            start = t1 - tgd // 2
        else:
            span = tn - t1
            pieces = _plan_pieces(tgd, want_long, rng)
            for _ in range(8):
                length = sum(pieces) + FILLER_MS * (len(pieces) - 1)
                budget = span + min(pieces[0], OVERHANG_CAP_MS) \
                    + min(pieces[-1], OVERHANG_CAP_MS)
                if length <= budget:
                    break
                if noiseless + 300 * (math.ceil(noiseless / LONG_MS)) \
                        > span + 2 * OVERHANG_CAP_MS:
                    raise InfeasibleSpec(
                        f"noiseless duration {noiseless:.0f} ms exceeds the "
                        f"feasible glance budget of session span {span} ms")
                tgd = max(spec.tgd_floor_ms, tgd - (length - budget))
                pieces = _plan_pieces(tgd, want_long, rng)
            else:
                # always representable: one piece may overhang on both sides
                tgd = min(tgd, span + 2 * OVERHANG_CAP_MS)
                pieces = [tgd]
            length = sum(pieces) + FILLER_MS * (len(pieces) - 1)
            s_min = t1 - min(pieces[0], OVERHANG_CAP_MS)
            s_max = max(tn + min(pieces[-1], OVERHANG_CAP_MS) - length, s_min)
            start = t1 + (span - length) // 2
            start = max(s_min, min(start, s_max))

        parts: list[tuple[int, str]] = []
        for j, p in enumerate(pieces):
            if j:
                parts.append((FILLER_MS, ON_ROAD))
            parts.append((p, CENTER_STACK))
        blocks.append((start, parts))

        truths.append(SessionTruth(
            trip_id=trip_id,
            session_index=si,
            t_first_ms=t1,
            t_last_ms=tn,
            n=n,
            n_list=n_list,
            n_homebar=n_home,
            v_avg_kmh=v_avg,
            tgd_planted_ms=int(sum(pieces)),
            noiseless_tgd_ms=float(noiseless),
            long_planted=any(p > LONG_MS for p in pieces),
            p_long=p_long,
            acc_active=plan.acc,
            sa_active=plan.sa,
            passenger_present=plan.passenger,
            n_pieces=len(pieces),
        ))

    # stitch the contiguous glance timeline: on-road between blocks
    glances: list[RawGlanceSegment] = []
    cursor = 0
    for start, parts in blocks:
        if start > cursor:
            glances.append(RawGlanceSegment(cursor, start, ON_ROAD))
        cursor = start
        for dur, aoi in parts:
            glances.append(RawGlanceSegment(cursor, cursor + dur, aoi))
            cursor += dur
    if cursor < trip_end:
        glances.append(RawGlanceSegment(cursor, trip_end, ON_ROAD))

    trip = TripLog(
        trip_id=trip_id,
        screen_w_px=spec.screen_w_px,
        screen_h_px=spec.screen_h_px,
        touches=tuple(touches),
        glances=tuple(glances),
        driving=driving,
        states=tuple(sorted(states, key=lambda s: s.timestamp_ms)),
    )
    return trip, truths


def generate_trips(spec: GeneratorSpec, n_trips: int, seed: int
                   ) -> list[tuple[TripLog, list[SessionTruth]]]:
    """n_trips independent trips with per-trip derived seeds."""
    seeds = np.random.SeedSequence(seed).spawn(n_trips)
    out = []
    for i in range(n_trips):
        child = int(seeds[i].generate_state(1)[0])
        out.append(generate_trip(spec, child, trip_id=f"synth-{seed}-{i:04d}"))
    return out


# ---------------------------------------------------------------------------
# Artifact injection (filter stress inputs)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArtifactSpec:
    """How many sub-threshold segments to plant inside existing glances."""

    n_tracking_loss: int = 0
    tracking_loss_ms: int = 200
    n_micro_glances: int = 0
    micro_glance_ms: int = 80
    n_blinks: int = 0
    blink_ms: int = 300
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.tracking_loss_ms < 300:
            raise ValueError("tracking-loss artifacts must be under 300 ms")
        if not 0 < self.micro_glance_ms < 120:
            raise ValueError("micro-glance artifacts must be under 120 ms")
        if not 0 < self.blink_ms < 500:
            raise ValueError("blink artifacts must be under 500 ms")
        if min(self.n_tracking_loss, self.n_micro_glances, self.n_blinks) < 0:
            raise ValueError("artifact counts must be >= 0")


def inject_artifacts(trip: TripLog, art: ArtifactSpec) -> TripLog:
    """Plant equal-flank sub-threshold segments that filtering removes
    exactly, leaving the filtered stream identical to the pristine one.

    Each artifact splits one sufficiently long real-glance host segment in
    half and inserts the artifact at the midpoint, so the flanks keep the
    host's target. Hosts are used at most once; too few hosts raises
    InfeasibleSpec.
    """
    rng = np.random.default_rng(art.seed)
    jobs = (["tracking_loss"] * art.n_tracking_loss
            + ["micro"] * art.n_micro_glances
            + ["blink"] * art.n_blinks)
    if not jobs:
        return trip

    need = {
        "tracking_loss": art.tracking_loss_ms,
        "micro": art.micro_glance_ms,
        "blink": art.blink_ms,
    }
    aoi_of = {
        "tracking_loss": "tracking_loss",
        "blink": "eyes_closed",
    }
    segments = [[g.start_ms, g.end_ms, g.target] for g in trip.glances]
    hosts = [i for i, (a, b, t) in enumerate(segments)
             if t not in ("tracking_loss", "eyes_closed")
             and b - a >= max(need.values()) + 2 * MIN_PIECE_MS + 200]
    if len(hosts) < len(jobs):
        raise InfeasibleSpec(
            f"{len(jobs)} artifacts requested but only {len(hosts)} "
            f"host segments are long enough")
    chosen = rng.choice(len(hosts), size=len(jobs), replace=False)

    inserts: list[tuple[int, int, str]] = []  # (host index, dur, aoi)
    for job, c in zip(jobs, chosen):
        host = hosts[int(c)]
        if job == "micro":
            aoi = "off_road" if segments[host][2] != "off_road" else "on_road"
        else:
            aoi = aoi_of[job]
        inserts.append((host, need[job], aoi))

    out: list[RawGlanceSegment] = []
    by_host = {h: (d, aoi) for h, d, aoi in inserts}
    for i, (a, b, t) in enumerate(segments):
        if i in by_host:
            d, aoi = by_host[i]
            mid = a + (b - a - d) // 2
            out.append(RawGlanceSegment(a, mid, t))
            out.append(RawGlanceSegment(mid, mid + d, aoi))
            out.append(RawGlanceSegment(mid + d, b, t))
        else:
            out.append(RawGlanceSegment(a, b, t))
    return TripLog(
        trip_id=trip.trip_id,
        screen_w_px=trip.screen_w_px,
        screen_h_px=trip.screen_h_px,
        touches=trip.touches,
        glances=tuple(out),
        driving=trip.driving,
        states=trip.states,
    )
