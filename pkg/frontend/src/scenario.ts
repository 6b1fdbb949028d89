/**
 * Editable scenario state for the what-if panel.
 *
 * The service rejects vectors whose count columns do not sum to N, so the
 * store never lets a draft leave that envelope:
 *
 *   - element-count edits recompute N and push the difference into the
 *     gesture columns (n_Tap absorbs first, spilling into n_Drag and
 *     n_Multitouch when it would go negative);
 *   - gesture edits are clamped to [0, N] and counter-balanced across the
 *     other two gesture columns so the gesture total stays N;
 *   - continuous fields are clamped to the training ranges from /schema;
 *   - automation flags are 0/1.
 *
 * N itself is derived, never edited directly.
 */

import type { FeatureSchema, FieldIssue } from "./api.js";

export const GESTURE_FEATURES = ["n_Tap", "n_Drag", "n_Multitouch"] as const;
export const FLAG_FEATURES = ["a_acc", "a_sa"] as const;
export const COUNT_TOTAL = "N";

const GESTURES: readonly string[] = GESTURE_FEATURES;
const FLAGS: readonly string[] = FLAG_FEATURES;

export class ScenarioStore {
  readonly elementFeatures: string[];
  readonly gestureFeatures: string[];
  readonly scalarFeatures: string[];
  readonly flagFeatures: string[];

  private readonly values = new Map<string, number>();
  private readonly listeners = new Set<() => void>();

  constructor(private readonly schema: FeatureSchema) {
    const names = schema.feature_names;
    this.elementFeatures = names.filter((n) => n.startsWith("n_") && !GESTURES.includes(n));
    this.gestureFeatures = names.filter((n) => GESTURES.includes(n));
    this.flagFeatures = names.filter((n) => FLAGS.includes(n));
    this.scalarFeatures = names.filter(
      (n) => !n.startsWith("n_") && n !== COUNT_TOTAL && !FLAGS.includes(n),
    );
    for (const name of names) this.values.set(name, 0);
    // zero counts are always consistent; scalars still need range clamping
    for (const name of this.scalarFeatures) {
      this.values.set(name, this.clampToRange(name, 0));
    }
  }

  get(name: string): number {
    return this.values.get(name) ?? 0;
  }

  range(name: string): { min: number; max: number } {
    return this.schema.ranges[name] ?? { min: -Infinity, max: Infinity };
  }

  subscribe(listener: () => void): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  // ------------------------------------------------------------- edits

  setElementCount(name: string, raw: number): void {
    if (!this.elementFeatures.includes(name)) {
      throw new Error(`not an element count: ${name}`);
    }
    const next = Math.max(0, Math.round(numberOr(raw, this.get(name))));
    const delta = next - this.get(name);
    this.values.set(name, next);
    this.values.set(COUNT_TOTAL, this.get(COUNT_TOTAL) + delta);
    this.spread(delta, this.gestureFeatures);
    this.notify();
  }

  setGestureCount(name: string, raw: number): void {
    if (!this.gestureFeatures.includes(name)) {
      throw new Error(`not a gesture count: ${name}`);
    }
    const total = this.get(COUNT_TOTAL);
    const next = Math.min(total, Math.max(0, Math.round(numberOr(raw, this.get(name)))));
    const delta = next - this.get(name);
    this.values.set(name, next);
    this.spread(-delta, this.gestureFeatures.filter((g) => g !== name));
    this.notify();
  }

  setScalar(name: string, raw: number): void {
    if (!this.scalarFeatures.includes(name)) {
      throw new Error(`not a continuous field: ${name}`);
    }
    if (Number.isFinite(raw)) {
      this.values.set(name, this.clampToRange(name, raw));
    }
    this.notify();
  }

  setFlag(name: string, on: boolean): void {
    if (!this.flagFeatures.includes(name)) {
      throw new Error(`not a flag: ${name}`);
    }
    this.values.set(name, on ? 1 : 0);
    this.notify();
  }

  // ----------------------------------------------------------- exports

  asRequest(): Record<string, number> {
    const out: Record<string, number> = {};
    for (const name of this.schema.feature_names) {
      const v = this.get(name);
      out[name] = this.schema.integer_features.includes(name) ? Math.round(v) : v;
    }
    return out;
  }

  /** Mirror of the server-side vector invariants; empty when consistent. */
  issues(): FieldIssue[] {
    return validateDraft(this.asRequest(), this.elementFeatures, this.gestureFeatures);
  }

  // ----------------------------------------------------------- internals

  private clampToRange(name: string, raw: number): number {
    const r = this.range(name);
    return Math.min(r.max, Math.max(r.min, raw));
  }

  /**
   * Add `delta` into `targets` in order, clamping each at zero and
   * carrying the shortfall to the next. The caller guarantees the totals
   * work out (the gesture sum can never be pushed below zero), so the
   * remainder is always fully absorbed.
   */
  private spread(delta: number, targets: readonly string[]): void {
    let remaining = delta;
    for (const name of targets) {
      if (remaining === 0) break;
      const current = this.get(name);
      const next = Math.max(0, current + remaining);
      remaining -= next - current;
      this.values.set(name, next);
    }
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }
}

function numberOr(raw: number, fallback: number): number {
  return Number.isFinite(raw) ? raw : fallback;
}

/** Client-side check matching what the service enforces on POST bodies. */
export function validateDraft(
  vector: Record<string, number>,
  elementFeatures: readonly string[],
  gestureFeatures: readonly string[],
): FieldIssue[] {
  const issues: FieldIssue[] = [];
  const at = (name: string) => vector[name] ?? 0;

  for (const name of [...elementFeatures, ...gestureFeatures]) {
    const v = at(name);
    if (v < 0 || !Number.isInteger(v)) {
      issues.push({ field: name, message: "counts must be non-negative integers" });
    }
  }

  const n = at(COUNT_TOTAL);
  const elementSum = elementFeatures.reduce((s, name) => s + at(name), 0);
  const gestureSum = gestureFeatures.reduce((s, name) => s + at(name), 0);
  if (elementSum !== n) {
    issues.push({
      field: COUNT_TOTAL,
      message: `element counts sum to ${elementSum}, expected N=${n}`,
    });
  }
  if (gestureSum !== n) {
    issues.push({
      field: COUNT_TOTAL,
      message: `gesture counts sum to ${gestureSum}, expected N=${n}`,
    });
  }

  if (at("d_avg") < 0) {
    issues.push({ field: "d_avg", message: "must be >= 0" });
  }
  const speed = at("v_avg");
  if (speed < 0 || speed > 250) {
    issues.push({ field: "v_avg", message: "must be within [0, 250]" });
  }
  for (const name of FLAG_FEATURES) {
    const v = at(name);
    if (v !== 0 && v !== 1) {
      issues.push({ field: name, message: "flags must be 0 or 1" });
    }
  }
  return issues;
}
