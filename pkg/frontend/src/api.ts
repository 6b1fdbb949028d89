/**
 * Typed client for the glancelab prediction service.
 *
 * Every response body is validated against a zod schema before it reaches
 * the UI, so a drifting server contract fails loudly here instead of as
 * NaNs in a plot. Error mapping mirrors the service contract:
 *
 *   400 -> ValidationError with per-field diagnostics
 *   404 -> HttpError (unknown feature name in /dependence)
 *   503 -> ServiceUnavailableError (no models loaded yet)
 *   fetch rejection -> NetworkError (service unreachable)
 *
 * Aborted requests re-throw the abort error untouched so callers can tell
 * planned cancellation apart from real failures.
 */

import { z } from "zod";

// ------------------------------------------------------------- schemas

const numberByFeature = z.record(z.string(), z.number());

export const predictionSchema = z.object({
  long_glance_probability: z.number(),
  tgd_ms: z.number(),
  model_version: z.string(),
});

export const explanationDocSchema = z.object({
  base_value: z.number(),
  model_output: z.number(),
  phi: numberByFeature,
  instance: numberByFeature,
  units: z.string(),
});

export const explainResponseSchema = z.object({
  prediction: predictionSchema,
  classification: explanationDocSchema,
  regression: explanationDocSchema,
});

const beeswarmRowSchema = z.object({
  feature: z.string(),
  phi: z.array(z.number()),
  values: z.array(z.number()),
});

export const globalBlockSchema = z.object({
  importance: numberByFeature,
  ranking: z.array(z.string()),
  base_value: z.number(),
  n_instances: z.number(),
  beeswarm: z.array(beeswarmRowSchema),
});

export const globalResponseSchema = z.object({
  model_version: z.string(),
  classification: globalBlockSchema.nullable(),
  regression: globalBlockSchema.nullable(),
});

export const dependenceBlockSchema = z.object({
  feature: z.string(),
  values: z.array(z.number()),
  phi: z.array(z.number()),
  color_feature: z.string(),
  color_values: z.array(z.number()),
});

export const dependenceResponseSchema = z.object({
  model_version: z.string(),
  feature: z.string(),
  classification: dependenceBlockSchema.nullable(),
  regression: dependenceBlockSchema.nullable(),
});

export const featureSchemaSchema = z.object({
  feature_names: z.array(z.string()),
  integer_features: z.array(z.string()),
  ranges: z.record(z.string(), z.object({ min: z.number(), max: z.number() })),
  model_version: z.string(),
});

export type Prediction = z.infer<typeof predictionSchema>;
export type ExplanationDoc = z.infer<typeof explanationDocSchema>;
export type ExplainResponse = z.infer<typeof explainResponseSchema>;
export type BeeswarmRow = z.infer<typeof beeswarmRowSchema>;
export type GlobalBlock = z.infer<typeof globalBlockSchema>;
export type GlobalResponse = z.infer<typeof globalResponseSchema>;
export type DependenceBlock = z.infer<typeof dependenceBlockSchema>;
export type DependenceResponse = z.infer<typeof dependenceResponseSchema>;
export type FeatureSchema = z.infer<typeof featureSchemaSchema>;

// -------------------------------------------------------------- errors

export interface FieldIssue {
  /** Feature name, or "" for cross-field invariant violations. */
  field: string;
  message: string;
}

export class ValidationError extends Error {
  constructor(readonly issues: FieldIssue[]) {
    super(
      issues
        .map((i) => (i.field ? `${i.field}: ${i.message}` : i.message))
        .join("; ") || "invalid request",
    );
    this.name = "ValidationError";
  }
}

export class ServiceUnavailableError extends Error {
  constructor() {
    super("models not loaded");
    this.name = "ServiceUnavailableError";
  }
}

export class NetworkError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "NetworkError";
  }
}

export class HttpError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "HttpError";
  }
}

/** The body came back 200 but does not match the expected contract. */
export class DecodeError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "DecodeError";
  }
}

export function isAbortError(err: unknown): boolean {
  return (
    typeof err === "object" &&
    err !== null &&
    (err as { name?: string }).name === "AbortError"
  );
}

// -------------------------------------------------------------- client

/** Structural subset of Response the client needs; eases test fakes. */
export interface ResponseLike {
  ok: boolean;
  status: number;
  json(): Promise<unknown>;
}

export type FetchLike = (url: string, init: RequestInit) => Promise<ResponseLike>;

export class ApiClient {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.base = baseUrl.replace(/\/+$/, "");
    // bind lazily so a page-level fetch keeps its window receiver
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  predict(vector: Record<string, number>, signal?: AbortSignal): Promise<Prediction> {
    return this.request("POST", "/predict", predictionSchema, vector, signal);
  }

  explain(vector: Record<string, number>, signal?: AbortSignal): Promise<ExplainResponse> {
    return this.request("POST", "/explain", explainResponseSchema, vector, signal);
  }

  global(signal?: AbortSignal): Promise<GlobalResponse> {
    return this.request("GET", "/global", globalResponseSchema, undefined, signal);
  }

  dependence(feature: string, signal?: AbortSignal): Promise<DependenceResponse> {
    const path = `/dependence/${encodeURIComponent(feature)}`;
    return this.request("GET", path, dependenceResponseSchema, undefined, signal);
  }

  schema(signal?: AbortSignal): Promise<FeatureSchema> {
    return this.request("GET", "/schema", featureSchemaSchema, undefined, signal);
  }

  private async request<T>(
    method: string,
    path: string,
    schema: z.ZodType<T>,
    body?: unknown,
    signal?: AbortSignal,
  ): Promise<T> {
    let resp: ResponseLike;
    try {
      resp = await this.fetchImpl(this.base + path, {
        method,
        headers: body === undefined ? undefined : { "content-type": "application/json" },
        body: body === undefined ? undefined : JSON.stringify(body),
        signal: signal ?? null,
      });
    } catch (err) {
      if (isAbortError(err)) throw err;
      throw new NetworkError(`cannot reach ${this.base}${path}`);
    }
    if (!resp.ok) throw await toError(resp);

    let data: unknown;
    try {
      data = await resp.json();
    } catch {
      throw new DecodeError(`${path}: response body is not JSON`);
    }
    const parsed = schema.safeParse(data);
    if (!parsed.success) {
      throw new DecodeError(`${path}: unexpected response shape (${parsed.error.message})`);
    }
    return parsed.data;
  }
}

const issueSchema = z.object({ field: z.string(), message: z.string() });

async function toError(resp: ResponseLike): Promise<Error> {
  let detail: unknown;
  try {
    detail = (await resp.json() as { detail?: unknown })?.detail;
  } catch {
    detail = undefined;
  }
  if (resp.status === 400 && Array.isArray(detail)) {
    const issues: FieldIssue[] = [];
    for (const entry of detail) {
      const parsed = issueSchema.safeParse(entry);
      if (parsed.success) issues.push(parsed.data);
    }
    if (issues.length > 0) return new ValidationError(issues);
  }
  if (resp.status === 503) return new ServiceUnavailableError();
  const message = typeof detail === "string" ? detail : `HTTP ${resp.status}`;
  return new HttpError(resp.status, message);
}
