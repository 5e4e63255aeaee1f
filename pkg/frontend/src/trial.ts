/**
 * Per-trial measurement state.
 *
 * Tracks when the pair was first painted, accumulates pointer-inside-row
 * time per criterion across re-entries, and optionally records a
 * low-frequency cursor trace. All timing uses an injected monotonic clock
 * (performance.now in the browser) — never wall time.
 */

import type { Answer, TrialPayload } from "./schema.js";

/** Monotonic clock returning milliseconds. */
export type Clock = () => number;

export const CURSOR_TRACE_MIN_INTERVAL_MS = 1000 / 30;

export class TrialState {
  readonly payload: TrialPayload;
  private readonly clock: Clock;
  private shownAt: number | null = null;
  private readonly hoverMs = new Map<string, number>();
  private readonly hoverEnteredAt = new Map<string, number>();
  private readonly trace: Array<[number, number, number]> | null;
  private lastTraceAt = -Infinity;
  private submitted = false;

  constructor(payload: TrialPayload, clock: Clock, captureCursor = false) {
    this.payload = payload;
    this.clock = clock;
    this.trace = captureCursor ? [] : null;
    for (const criterion of payload.criteria) {
      this.hoverMs.set(criterion.id, 0);
    }
  }

  /** Marks first paint; later calls are ignored so shown_at is set once. */
  markShown(): void {
    if (this.shownAt === null) {
      this.shownAt = this.clock();
    }
  }

  get isShown(): boolean {
    return this.shownAt !== null;
  }

  hoverEnter(criterionId: string): void {
    if (!this.hoverMs.has(criterionId) || this.submitted) return;
    if (!this.hoverEnteredAt.has(criterionId)) {
      this.hoverEnteredAt.set(criterionId, this.clock());
    }
  }

  hoverLeave(criterionId: string): void {
    const entered = this.hoverEnteredAt.get(criterionId);
    if (entered === undefined) return;
    this.hoverEnteredAt.delete(criterionId);
    const delta = Math.max(0, this.clock() - entered);
    this.hoverMs.set(criterionId, (this.hoverMs.get(criterionId) ?? 0) + delta);
  }

  /** Current accumulator value including any open hover, in milliseconds. */
  hoverTotalMs(criterionId: string): number {
    let total = this.hoverMs.get(criterionId) ?? 0;
    const entered = this.hoverEnteredAt.get(criterionId);
    if (entered !== undefined) {
      total += Math.max(0, this.clock() - entered);
    }
    return total;
  }

  recordCursor(x: number, y: number): void {
    if (this.trace === null || this.shownAt === null) return;
    const now = this.clock();
    if (now - this.lastTraceAt < CURSOR_TRACE_MIN_INTERVAL_MS) return;
    this.lastTraceAt = now;
    this.trace.push([x, y, now - this.shownAt]);
  }

  /**
   * Freezes the trial into an answer payload. Open hovers are closed at
   * click time; repeated calls return null so double-clicks submit once.
   */
  finish(chosenSide: "left" | "right"): Answer | null {
    if (this.shownAt === null || this.submitted) return null;
    this.submitted = true;
    const now = this.clock();
    for (const id of [...this.hoverEnteredAt.keys()]) {
      const entered = this.hoverEnteredAt.get(id)!;
      this.hoverEnteredAt.delete(id);
      this.hoverMs.set(id, (this.hoverMs.get(id) ?? 0) + Math.max(0, now - entered));
    }
    const attention: Record<string, number> = {};
    for (const [id, ms] of this.hoverMs) {
      attention[id] = ms / 1000;
    }
    const chosen =
      chosenSide === "left" ? this.payload.left.id : this.payload.right.id;
    const answer: Answer = {
      pair: [this.payload.left.id, this.payload.right.id],
      choice: chosen,
      response_time_s: Math.max((now - this.shownAt) / 1000, 1e-6),
      attention_s: attention,
    };
    if (this.trace !== null) {
      answer.cursor_trace = this.trace;
    }
    return answer;
  }
}
