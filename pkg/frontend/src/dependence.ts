/**
 * Dependence scatter: contribution vs feature value, colored by the
 * server-chosen interaction partner (red = high partner value, blue =
 * low). The partner choice is the server's; the client only draws it.
 */

import type { DependenceBlock } from "./api.js";
import { divergingColor, normalized } from "./color.js";
import { clear, el, fmtNum, svgEl } from "./dom.js";

const WIDTH = 640;
const HEIGHT = 300;
const M = { top: 14, right: 16, bottom: 38, left: 56 };

export function renderDependence(container: HTMLElement, block: DependenceBlock): void {
  clear(container);
  if (block.values.length === 0) {
    container.append(el("p", { class: "empty-state" }, "No explained instances to plot."));
    return;
  }

  const xDomain = extent(block.values);
  const yDomain = extent([...block.phi, 0]);
  const x = scale(xDomain, M.left, WIDTH - M.right);
  const y = scale(yDomain, HEIGHT - M.bottom, M.top); // inverted: up is high

  const svg = svgEl("svg", {
    viewBox: `0 0 ${WIDTH} ${HEIGHT}`,
    class: "dependence-plot",
    role: "img",
    "data-color-feature": block.color_feature,
  });

  svg.append(
    svgEl("line", {
      x1: String(M.left),
      x2: String(WIDTH - M.right),
      y1: String(y(0)),
      y2: String(y(0)),
      stroke: "#bbb",
      "stroke-dasharray": "3 3",
    }),
  );

  const colorT = normalized(block.color_values);
  block.values.forEach((v, i) => {
    const phi = block.phi[i];
    if (phi === undefined) return;
    svg.append(
      svgEl("circle", {
        cx: String(x(v)),
        cy: String(y(phi)),
        r: "3",
        fill: divergingColor(colorT[i] ?? 0.5),
        "fill-opacity": "0.85",
        "data-phi": String(phi),
      }),
    );
  });

  svg.append(
    svgEl("text", {
      x: String((M.left + WIDTH - M.right) / 2),
      y: String(HEIGHT - 8),
      "text-anchor": "middle",
      class: "axis-label",
    }, block.feature),
    svgEl("text", {
      x: "14",
      y: String((M.top + HEIGHT - M.bottom) / 2),
      "text-anchor": "middle",
      transform: `rotate(-90 14 ${(M.top + HEIGHT - M.bottom) / 2})`,
      class: "axis-label",
    }, "contribution"),
    svgEl("text", { x: String(M.left), y: String(HEIGHT - 22), class: "axis-label" },
      fmtNum(xDomain[0])),
    svgEl("text", {
      x: String(WIDTH - M.right),
      y: String(HEIGHT - 22),
      "text-anchor": "end",
      class: "axis-label",
    }, fmtNum(xDomain[1])),
  );

  container.append(svg, partnerLegend(block.color_feature));
}

function extent(values: readonly number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (v < lo) lo = v;
    if (v > hi) hi = v;
  }
  if (lo === hi) {
    lo -= 1;
    hi += 1;
  }
  const pad = (hi - lo) * 0.05;
  return [lo - pad, hi + pad];
}

function scale(domain: [number, number], r0: number, r1: number): (v: number) => number {
  const [d0, d1] = domain;
  return (v) => r0 + ((v - d0) / (d1 - d0)) * (r1 - r0);
}

function partnerLegend(colorFeature: string): HTMLElement {
  const ramp = el("span", { class: "color-ramp", "aria-hidden": "true" });
  for (let i = 0; i < 16; i++) {
    const chip = el("span", { class: "ramp-chip" });
    chip.style.backgroundColor = divergingColor(i / 15);
    ramp.append(chip);
  }
  return el(
    "div",
    { class: "legend" },
    el("span", { class: "legend-feature" }, `colored by ${colorFeature}: `),
    el("span", {}, "low "),
    ramp,
    el("span", {}, " high"),
  );
}
