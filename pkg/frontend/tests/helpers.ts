/**
 * Shared test fixtures: a compact feature schema (same shape the live
 * service advertises, fewer columns), canned responses, and a scriptable
 * fetch fake whose individual responses can be resolved out of order.
 */

import type {
  ExplainResponse,
  FeatureSchema,
  FetchLike,
  ResponseLike,
} from "../src/api.js";

export const ELEMENTS = ["n_Button", "n_List", "n_Homebar", "n_Keyboard"];
export const GESTURES = ["n_Tap", "n_Drag", "n_Multitouch"];
export const SCALARS = ["d_avg", "v_avg", "theta_avg"];
export const FLAGS = ["a_acc", "a_sa"];
export const FEATURES = [...ELEMENTS, ...GESTURES, SCALARS[0]!, "N", SCALARS[1]!, SCALARS[2]!, ...FLAGS];

export function testSchema(): FeatureSchema {
  const ranges: Record<string, { min: number; max: number }> = {};
  for (const name of FEATURES) ranges[name] = { min: 0, max: 12 };
  ranges["d_avg"] = { min: 0, max: 900 };
  ranges["v_avg"] = { min: 0, max: 130 };
  ranges["theta_avg"] = { min: -4.5, max: 4.5 };
  return {
    feature_names: FEATURES,
    integer_features: [...ELEMENTS, ...GESTURES, "N", ...FLAGS].sort(),
    ranges,
    model_version: "cafe01-beef02",
  };
}

/** Explanation whose phi sums exactly to model_output - base_value. */
export function explainResponseFor(
  vector: Record<string, number>,
  seed = 1,
): ExplainResponse {
  const phiCls: Record<string, number> = {};
  const phiReg: Record<string, number> = {};
  let i = seed;
  let sumCls = 0;
  let sumReg = 0;
  for (const name of FEATURES) {
    i = (i * 1103515245 + 12345) % 2147483648;
    const p = ((i / 2147483648) - 0.5) * 0.08;
    phiCls[name] = p;
    phiReg[name] = p * 4000;
    sumCls += p;
    sumReg += p * 4000;
  }
  const baseCls = 0.5;
  const baseReg = 2500;
  return {
    prediction: {
      long_glance_probability: baseCls + sumCls,
      tgd_ms: Math.round(baseReg + sumReg),
      model_version: "cafe01-beef02",
    },
    classification: {
      base_value: baseCls,
      model_output: baseCls + sumCls,
      phi: phiCls,
      instance: { ...vector },
      units: "probability",
    },
    regression: {
      base_value: baseReg,
      model_output: baseReg + sumReg,
      phi: phiReg,
      instance: { ...vector },
      units: "ms",
    },
  };
}

export function jsonResponse(body: unknown, status = 200): ResponseLike {
  return {
    ok: status >= 200 && status < 300,
    status,
    json: () => Promise.resolve(body),
  };
}

export interface RecordedCall {
  url: string;
  init: RequestInit;
  body: Record<string, number> | null;
  resolve: (resp: ResponseLike) => void;
  reject: (err: unknown) => void;
}

/**
 * Fetch fake that records every call and leaves each one pending until
 * the test resolves it — the tool for latency-reordering scenarios.
 */
export function manualFetch(): { fetch: FetchLike; calls: RecordedCall[] } {
  const calls: RecordedCall[] = [];
  const fetchImpl: FetchLike = (url, init) => {
    return new Promise<ResponseLike>((resolve, reject) => {
      const body = typeof init.body === "string" ? JSON.parse(init.body) : null;
      calls.push({ url, init, body, resolve, reject });
    });
  };
  return { fetch: fetchImpl, calls };
}

/** Fetch fake with a routing table: path prefix -> responder. */
export function routedFetch(
  routes: Record<string, (url: string, init: RequestInit) => ResponseLike | Promise<ResponseLike>>,
): { fetch: FetchLike; log: { url: string; init: RequestInit }[] } {
  const log: { url: string; init: RequestInit }[] = [];
  const fetchImpl: FetchLike = async (url, init) => {
    log.push({ url, init });
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    for (const [prefix, responder] of Object.entries(routes)) {
      if (path === prefix || path.startsWith(prefix + "/")) {
        return responder(url, init);
      }
    }
    throw new TypeError(`no route for ${path}`);
  };
  return { fetch: fetchImpl, log };
}

/** Deterministic PRNG for edit storms. */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}
