/**
 * Session controller: a small state machine serializing all network
 * effects for one session.
 *
 *   loading -> trial -> submitting -> (trial | complete) -> results
 *
 * No preference-relevant state is kept beyond the active trial; a refresh
 * re-enters at `loading` and the service's idempotent next-pair endpoint
 * returns the same pending pair.
 */

import { ApiClient, ApiError } from "./api.js";
import type { ResultBundle, TrialPayload } from "./schema.js";
import { Clock, TrialState } from "./trial.js";

export type Phase =
  | "loading"
  | "trial"
  | "submitting"
  | "complete"
  | "inferring"
  | "results"
  | "failed"
  | "error";

export interface SessionOptions {
  clock?: Clock;
  captureCursor?: boolean;
  pollIntervalMs?: number;
  sleep?: (ms: number) => Promise<void>;
  onPhase?: (phase: Phase) => void;
}

const defaultSleep = (ms: number) =>
  new Promise<void>((resolve) => setTimeout(resolve, ms));

export class SessionController {
  phase: Phase = "loading";
  trial: TrialState | null = null;
  result: ResultBundle | null = null;
  failureDiagnostics: unknown = null;
  lastError: string | null = null;

  private readonly clock: Clock;
  private readonly captureCursor: boolean;
  private readonly pollIntervalMs: number;
  private readonly sleep: (ms: number) => Promise<void>;
  private readonly onPhase: (phase: Phase) => void;
  private busy = false;

  constructor(
    private readonly api: ApiClient,
    private readonly sessionId: string,
    options: SessionOptions = {},
  ) {
    this.clock = options.clock ?? (() => performance.now());
    this.captureCursor = options.captureCursor ?? false;
    this.pollIntervalMs = options.pollIntervalMs ?? 500;
    this.sleep = options.sleep ?? defaultSleep;
    this.onPhase = options.onPhase ?? (() => undefined);
  }

  private setPhase(phase: Phase): void {
    this.phase = phase;
    this.onPhase(phase);
  }

  /** Fetches the pending pair and enters `trial` (or `complete`). */
  async start(): Promise<void> {
    this.setPhase("loading");
    await this.fetchTrial();
  }

  private async fetchTrial(): Promise<void> {
    try {
      const payload = await this.api.nextPair(this.sessionId);
      if (payload.complete) {
        this.trial = null;
        this.setPhase("complete");
        return;
      }
      this.trial = new TrialState(payload as TrialPayload, this.clock, this.captureCursor);
      this.trial.markShown();
      this.setPhase("trial");
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      this.setPhase("error");
    }
  }

  /**
   * Submits the active trial's choice. Double submissions are suppressed;
   * a 409 conflict (stale pair after a refresh race) resyncs by
   * refetching the pending pair without duplicating any record.
   */
  async choose(side: "left" | "right"): Promise<void> {
    if (this.phase !== "trial" || this.trial === null || this.busy) return;
    const answer = this.trial.finish(side);
    if (answer === null) return;
    this.busy = true;
    this.setPhase("submitting");
    try {
      await this.api.submitAnswer(this.sessionId, answer);
    } catch (err) {
      if (!(err instanceof ApiError && err.status === 409)) {
        this.lastError = err instanceof Error ? err.message : String(err);
        this.busy = false;
        this.setPhase("error");
        return;
      }
      // Conflict: the server is ahead (or the session moved on); fall
      // through and resync from next-pair.
    }
    this.busy = false;
    await this.fetchTrial();
  }

  /** Starts inference and polls until the results view can render. */
  async runInference(): Promise<void> {
    if (this.phase !== "complete") return;
    this.setPhase("inferring");
    try {
      await this.api.startInference(this.sessionId);
      for (;;) {
        const res = await this.api.results(this.sessionId);
        if (res.status === "done") {
          this.result = res.result;
          this.setPhase("results");
          return;
        }
        if (res.status === "failed") {
          this.failureDiagnostics = res.diagnostics;
          this.setPhase("failed");
          return;
        }
        await this.sleep(this.pollIntervalMs);
      }
    } catch (err) {
      this.lastError = err instanceof Error ? err.message : String(err);
      this.setPhase("error");
    }
  }
}
