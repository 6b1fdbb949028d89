/**
 * Force plot for one explanation: contribution segments tile a single
 * horizontal band from the base value to the model output. Positive
 * contributions (red) stack first, pushing right; negatives (blue) pull
 * back left to land exactly on the output. Contributions beyond
 * `maxSegments` fold into one remainder segment so the signed segment
 * sum always equals model_output - base_value.
 */

import type { ExplanationDoc } from "./api.js";
import { NEGATIVE_COLOR, POSITIVE_COLOR } from "./color.js";
import { clear, fmtNum, svgEl } from "./dom.js";

export interface ForceSegment {
  /** Feature name, or null for the folded remainder. */
  feature: string | null;
  label: string;
  phi: number;
  /** Cumulative value where the segment begins / ends (end = start + phi). */
  start: number;
  end: number;
  positive: boolean;
}

export interface ForceModel {
  baseValue: number;
  output: number;
  segments: ForceSegment[];
  /** Signed sum over segments; must match output - baseValue. */
  signedSum: number;
  /** |signedSum - (output - baseValue)|: the client-side additivity check. */
  gap: number;
  lo: number;
  hi: number;
}

export function forceModel(doc: ExplanationDoc, maxSegments = 9): ForceModel {
  const entries = Object.entries(doc.phi).sort(
    (a, b) => Math.abs(b[1]) - Math.abs(a[1]),
  );

  let kept = entries;
  let rest: typeof entries = [];
  if (entries.length > maxSegments) {
    kept = entries.slice(0, maxSegments - 1);
    rest = entries.slice(maxSegments - 1);
  }

  const pieces = kept.map(([name, phi]) => {
    const value = doc.instance[name];
    const label = value === undefined ? name : `${name} = ${fmtNum(value)}`;
    return { feature: name as string | null, label, phi };
  });
  if (rest.length > 0) {
    const restSum = rest.reduce((s, [, phi]) => s + phi, 0);
    pieces.push({ feature: null, label: `${rest.length} other features`, phi: restSum });
  }

  const positives = pieces.filter((p) => p.phi >= 0).sort((a, b) => b.phi - a.phi);
  const negatives = pieces.filter((p) => p.phi < 0).sort((a, b) => a.phi - b.phi);

  let cursor = doc.base_value;
  const segments: ForceSegment[] = [];
  for (const p of [...positives, ...negatives]) {
    segments.push({
      feature: p.feature,
      label: p.label,
      phi: p.phi,
      start: cursor,
      end: cursor + p.phi,
      positive: p.phi >= 0,
    });
    cursor += p.phi;
  }

  const signedSum = segments.reduce((s, seg) => s + seg.phi, 0);
  let lo = Math.min(doc.base_value, doc.model_output);
  let hi = Math.max(doc.base_value, doc.model_output);
  for (const seg of segments) {
    lo = Math.min(lo, seg.start, seg.end);
    hi = Math.max(hi, seg.start, seg.end);
  }

  return {
    baseValue: doc.base_value,
    output: doc.model_output,
    segments,
    signedSum,
    gap: Math.abs(signedSum - (doc.model_output - doc.base_value)),
    lo,
    hi,
  };
}

export interface ForceRenderOptions {
  width?: number;
  title?: string;
}

const BAND_TOP = 46;
const BAND_HEIGHT = 30;
const HEIGHT = 128;
const MARGIN = 10;

export function renderForce(
  container: HTMLElement,
  doc: ExplanationDoc,
  opts: ForceRenderOptions = {},
): ForceModel {
  const width = opts.width ?? 640;
  const model = forceModel(doc);

  const span = model.hi - model.lo;
  const pad = (span > 0 ? span : Math.max(1, Math.abs(model.baseValue))) * 0.08;
  const lo = model.lo - pad;
  const hi = model.hi + pad;
  const x = (v: number) => MARGIN + ((v - lo) / (hi - lo)) * (width - 2 * MARGIN);

  const svg = svgEl("svg", {
    viewBox: `0 0 ${width} ${HEIGHT}`,
    class: "force-plot",
    role: "img",
  });

  if (opts.title) {
    svg.append(
      svgEl("text", { x: String(MARGIN), y: "14", class: "plot-title" }, opts.title),
    );
  }

  // contribution band
  for (const seg of model.segments) {
    const x0 = x(Math.min(seg.start, seg.end));
    const w = Math.abs(x(seg.end) - x(seg.start));
    if (w < 0.25) continue; // invisible sliver; still counted in the sums
    const rect = svgEl("rect", {
      x: String(x0),
      y: String(BAND_TOP),
      width: String(w),
      height: String(BAND_HEIGHT),
      fill: seg.positive ? POSITIVE_COLOR : NEGATIVE_COLOR,
      stroke: "#ffffff",
      "stroke-width": "1",
      "data-feature": seg.feature ?? "(other)",
      "data-phi": String(seg.phi),
      class: seg.positive ? "force-seg pos" : "force-seg neg",
    });
    rect.append(
      svgEl("title", {}, `${seg.label}: ${seg.phi >= 0 ? "+" : ""}${fmtNum(seg.phi, 4)}`),
    );
    svg.append(rect);
    if (w >= 56) {
      svg.append(
        svgEl(
          "text",
          {
            x: String(x0 + w / 2),
            y: String(BAND_TOP + BAND_HEIGHT + 16),
            "text-anchor": "middle",
            class: "seg-label",
          },
          seg.label,
        ),
      );
    }
  }

  // base-value marker (dashed) and output marker (solid)
  svg.append(
    svgEl("line", {
      x1: String(x(model.baseValue)),
      x2: String(x(model.baseValue)),
      y1: String(BAND_TOP - 18),
      y2: String(BAND_TOP + BAND_HEIGHT + 4),
      class: "base-marker",
      stroke: "#444",
      "stroke-dasharray": "4 3",
    }),
    svgEl(
      "text",
      {
        x: String(x(model.baseValue)),
        y: String(BAND_TOP - 22),
        "text-anchor": "middle",
        class: "marker-label",
      },
      `base ${fmtNum(model.baseValue)}`,
    ),
    svgEl("line", {
      x1: String(x(model.output)),
      x2: String(x(model.output)),
      y1: String(BAND_TOP - 6),
      y2: String(BAND_TOP + BAND_HEIGHT + 10),
      class: "output-marker",
      stroke: "#111",
      "stroke-width": "2",
    }),
    svgEl(
      "text",
      {
        x: String(x(model.output)),
        y: String(BAND_TOP + BAND_HEIGHT + 28),
        "text-anchor": "middle",
        class: "marker-label output",
      },
      `f(x) = ${fmtNum(model.output)}${doc.units ? " " + doc.units : ""}`,
    ),
  );

  // the response must be internally additive; flag it loudly if not
  if (model.gap > 1e-6) {
    svg.append(
      svgEl(
        "text",
        { x: String(MARGIN), y: String(HEIGHT - 6), class: "force-warning", fill: "#b00" },
        `inconsistent explanation: segments miss f(x) by ${model.gap.toExponential(2)}`,
      ),
    );
  }

  clear(container);
  container.append(svg);
  return model;
}
