/**
 * Shared diverging red/blue scale: red marks high feature values and
 * positive contributions, blue marks low values and negative
 * contributions, passing through a neutral grey midpoint.
 */

export const POSITIVE_COLOR = "#d13b4a"; // pushes the prediction up
export const NEGATIVE_COLOR = "#3b6fd1"; // pulls it down

type Rgb = readonly [number, number, number];

const LOW: Rgb = [59, 111, 209];
const MID: Rgb = [201, 201, 206];
const HIGH: Rgb = [209, 59, 74];

function mix(a: Rgb, b: Rgb, t: number): string {
  const c = a.map((av, i) => Math.round(av + (b[i]! - av) * t));
  return `rgb(${c[0]}, ${c[1]}, ${c[2]})`;
}

/** Map t in [0, 1] onto the blue-grey-red ramp (clamped outside). */
export function divergingColor(t: number): string {
  const u = Math.min(1, Math.max(0, t));
  return u < 0.5 ? mix(LOW, MID, u * 2) : mix(MID, HIGH, (u - 0.5) * 2);
}

/** Min-max normalize to [0, 1]; a constant column maps to the midpoint. */
export function normalized(values: readonly number[]): number[] {
  if (values.length === 0) return [];
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  const span = hi - lo;
  if (!(span > 0)) return values.map(() => 0.5);
  return values.map((v) => (v - lo) / span);
}
