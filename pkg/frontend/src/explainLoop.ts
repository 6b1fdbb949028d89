/**
 * Debounced /explain scheduler with stale-response suppression.
 *
 * A slider drag produces a burst of edits; only the final state should
 * reach the service, so edits are debounced (150 ms). Responses can also
 * arrive out of order under real latency, so every dispatch takes a
 * monotonically increasing token and a result is rendered only if its
 * token is still the newest — a superseded in-flight request is aborted
 * outright and its abort error swallowed.
 */

import { ApiClient, ExplainResponse, isAbortError } from "./api.js";

export const DEBOUNCE_MS = 150;

export interface ExplainLoopOptions {
  client: ApiClient;
  onResult: (resp: ExplainResponse) => void;
  onError: (err: unknown) => void;
  debounceMs?: number;
}

export class ExplainLoop {
  private readonly client: ApiClient;
  private readonly onResult: (resp: ExplainResponse) => void;
  private readonly onError: (err: unknown) => void;
  private readonly debounceMs: number;

  private timer: ReturnType<typeof setTimeout> | null = null;
  private lastVector: Record<string, number> | null = null;
  private seq = 0;
  private controller: AbortController | null = null;

  constructor(opts: ExplainLoopOptions) {
    this.client = opts.client;
    this.onResult = opts.onResult;
    this.onError = opts.onError;
    this.debounceMs = opts.debounceMs ?? DEBOUNCE_MS;
  }

  /** Queue the latest draft; any draft still waiting is replaced. */
  schedule(vector: Record<string, number>): void {
    this.lastVector = vector;
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = setTimeout(() => this.fire(), this.debounceMs);
  }

  /** Re-send the last draft immediately (retry button, reconnects). */
  retry(): void {
    if (this.timer !== null) {
      clearTimeout(this.timer);
      this.timer = null;
    }
    this.fire();
  }

  dispose(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
    this.controller?.abort();
  }

  private fire(): void {
    this.timer = null;
    const vector = this.lastVector;
    if (vector === null) return;

    const token = ++this.seq;
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;

    this.client.explain(vector, controller.signal).then(
      (resp) => {
        if (token === this.seq) this.onResult(resp);
      },
      (err) => {
        if (token !== this.seq || isAbortError(err)) return;
        this.onError(err);
      },
    );
  }
}
