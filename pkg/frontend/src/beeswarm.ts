/**
 * Beeswarm of per-instance contributions: one row per feature in the
 * server-provided importance ranking (never re-sorted locally), one dot
 * per explained instance. x = contribution, color = that instance's
 * feature value on the shared red/blue scale.
 */

import type { GlobalBlock } from "./api.js";
import { divergingColor, normalized } from "./color.js";
import { clear, el, fmtNum, svgEl } from "./dom.js";

const ROW_HEIGHT = 22;
const LABEL_WIDTH = 130;
const AXIS_HEIGHT = 26;

export function renderBeeswarm(
  container: HTMLElement,
  block: GlobalBlock,
  opts: { width?: number } = {},
): void {
  clear(container);
  const rows = block.ranking
    .map((feature) => block.beeswarm.find((r) => r.feature === feature))
    .filter((r): r is NonNullable<typeof r> => r !== undefined);

  if (rows.length === 0 || block.n_instances === 0) {
    container.append(el("p", { class: "empty-state" }, "No explained instances to plot."));
    return;
  }

  const width = opts.width ?? 680;
  const height = rows.length * ROW_HEIGHT + AXIS_HEIGHT;

  let lo = 0;
  let hi = 0;
  for (const row of rows) {
    for (const phi of row.phi) {
      if (phi < lo) lo = phi;
      if (phi > hi) hi = phi;
    }
  }
  if (hi === lo) {
    lo -= 1;
    hi += 1;
  }
  const pad = (hi - lo) * 0.05;
  lo -= pad;
  hi += pad;
  const x = (v: number) => LABEL_WIDTH + ((v - lo) / (hi - lo)) * (width - LABEL_WIDTH - 10);

  const svg = svgEl("svg", {
    viewBox: `0 0 ${width} ${height}`,
    class: "beeswarm-plot",
    role: "img",
  });

  svg.append(
    svgEl("line", {
      x1: String(x(0)),
      x2: String(x(0)),
      y1: "0",
      y2: String(rows.length * ROW_HEIGHT),
      stroke: "#bbb",
      "stroke-dasharray": "3 3",
    }),
  );

  rows.forEach((row, i) => {
    const yMid = i * ROW_HEIGHT + ROW_HEIGHT / 2;
    const group = svgEl("g", { class: "bee-row", "data-feature": row.feature });
    group.append(
      svgEl(
        "text",
        {
          x: String(LABEL_WIDTH - 8),
          y: String(yMid + 4),
          "text-anchor": "end",
          class: "row-label",
        },
        row.feature,
      ),
    );
    const colorT = normalized(row.values);
    row.phi.forEach((phi, j) => {
      group.append(
        svgEl("circle", {
          cx: String(x(phi)),
          cy: String(yMid + jitter(j)),
          r: "2.5",
          fill: divergingColor(colorT[j] ?? 0.5),
          "data-phi": String(phi),
        }),
      );
    });
    svg.append(group);
  });

  const axisY = rows.length * ROW_HEIGHT + 16;
  svg.append(
    svgEl("text", { x: String(LABEL_WIDTH), y: String(axisY), class: "axis-label" },
      fmtNum(lo)),
    svgEl("text", { x: String(x(0)), y: String(axisY), "text-anchor": "middle",
      class: "axis-label" }, "0"),
    svgEl("text", { x: String(width - 10), y: String(axisY), "text-anchor": "end",
      class: "axis-label" }, fmtNum(hi)),
  );

  container.append(svg, valueLegend());
}

/** Deterministic vertical scatter so re-renders are stable. */
function jitter(index: number): number {
  const h = (index * 2654435761) >>> 0;
  return ((h % 101) / 100 - 0.5) * (ROW_HEIGHT - 9);
}

function valueLegend(): HTMLElement {
  const ramp = el("span", { class: "color-ramp", "aria-hidden": "true" });
  for (let i = 0; i < 16; i++) {
    const chip = el("span", { class: "ramp-chip" });
    chip.style.backgroundColor = divergingColor(i / 15);
    ramp.append(chip);
  }
  return el(
    "div",
    { class: "legend" },
    el("span", {}, "feature value: low "),
    ramp,
    el("span", {}, " high"),
  );
}
