import { describe, expect, it } from "vitest";

import { AnswerSchema, type TrialPayload } from "../src/schema.js";
import { TrialState } from "../src/trial.js";
import { FakeClock } from "./fake-service.js";

function payload(criteria = ["g1", "g2"]): TrialPayload {
  return {
    complete: false,
    index: 0,
    budget: 5,
    criteria: criteria.map((id) => ({ id, name: id, direction: "gain" as const })),
    left: { id: "a", name: "A", performances: Object.fromEntries(criteria.map((c) => [c, 1])) },
    right: { id: "b", name: "B", performances: Object.fromEntries(criteria.map((c) => [c, 2])) },
  };
}

describe("TrialState timing", () => {
  it("records a scripted 2.0 s hover as 2000 ms", () => {
    const clock = new FakeClock();
    const trial = new TrialState(payload(), clock.tick);
    trial.markShown();
    trial.hoverEnter("g1");
    clock.advance(2000);
    trial.hoverLeave("g1");
    expect(trial.hoverTotalMs("g1")).toBe(2000);
    expect(trial.hoverTotalMs("g2")).toBe(0);
  });

  it("accumulates across re-entries and only grows", () => {
    const clock = new FakeClock();
    const trial = new TrialState(payload(), clock.tick);
    trial.markShown();
    let previous = 0;
    for (const ms of [300, 150, 700]) {
      trial.hoverEnter("g1");
      clock.advance(ms);
      trial.hoverLeave("g1");
      const total = trial.hoverTotalMs("g1");
      expect(total).toBeGreaterThanOrEqual(previous);
      previous = total;
    }
    expect(previous).toBe(1150);
  });

  it("sets shown_at exactly once", () => {
    const clock = new FakeClock();
    const trial = new TrialState(payload(), clock.tick);
    trial.markShown();
    clock.advance(1000);
    trial.markShown(); // ignored
    clock.advance(500);
    const answer = trial.finish("left")!;
    expect(answer.response_time_s).toBeCloseTo(1.5, 9);
  });

  it("measures a scripted 1.5 s response time", () => {
    const clock = new FakeClock();
    const trial = new TrialState(payload(), clock.tick);
    trial.markShown();
    clock.advance(1500);
    const answer = trial.finish("right")!;
    expect(answer.choice).toBe("b");
    expect(answer.response_time_s).toBeGreaterThanOrEqual(1.45);
    expect(answer.response_time_s).toBeLessThanOrEqual(1.55);
  });

  it("closes open hovers at click time", () => {
    const clock = new FakeClock();
    const trial = new TrialState(payload(), clock.tick);
    trial.markShown();
    trial.hoverEnter("g2");
    clock.advance(800);
    const answer = trial.finish("left")!;
    expect(answer.attention_s["g2"]).toBeCloseTo(0.8, 9);
  });

  it("reports unhovered criteria as zero", () => {
    const clock = new FakeClock();
    const trial = new TrialState(payload(["g1", "g2", "g3"]), clock.tick);
    trial.markShown();
    clock.advance(1000);
    const answer = trial.finish("left")!;
    expect(answer.attention_s).toEqual({ g1: 0, g2: 0, g3: 0 });
  });

  it("suppresses double submission", () => {
    const clock = new FakeClock();
    const trial = new TrialState(payload(), clock.tick);
    trial.markShown();
    clock.advance(100);
    expect(trial.finish("left")).not.toBeNull();
    expect(trial.finish("left")).toBeNull();
    expect(trial.finish("right")).toBeNull();
  });

  it("refuses to finish before being shown", () => {
    const trial = new TrialState(payload(), new FakeClock().tick);
    expect(trial.finish("left")).toBeNull();
  });

  it("keeps hover sum within response time", () => {
    const clock = new FakeClock();
    const trial = new TrialState(payload(), clock.tick);
    trial.markShown();
    trial.hoverEnter("g1");
    clock.advance(400);
    trial.hoverLeave("g1");
    trial.hoverEnter("g2");
    clock.advance(300);
    trial.hoverLeave("g2");
    clock.advance(200);
    const answer = trial.finish("left")!;
    const hoverSum = Object.values(answer.attention_s).reduce((a, b) => a + b, 0);
    expect(hoverSum).toBeLessThanOrEqual(answer.response_time_s + 1e-9);
  });

  it("produces schema-valid answers", () => {
    const clock = new FakeClock();
    const trial = new TrialState(payload(), clock.tick);
    trial.markShown();
    trial.hoverEnter("g1");
    clock.advance(1234);
    trial.hoverLeave("g1");
    clock.advance(100);
    const answer = trial.finish("right")!;
    expect(() => AnswerSchema.parse(answer)).not.toThrow();
  });

  it("throttles the cursor trace to at most 30 Hz", () => {
    const clock = new FakeClock();
    const trial = new TrialState(payload(), clock.tick, true);
    trial.markShown();
    for (let i = 0; i < 100; i++) {
      trial.recordCursor(i, i);
      clock.advance(10); // 100 Hz pointer events over 1 s
    }
    const answer = trial.finish("left")!;
    expect(answer.cursor_trace).toBeDefined();
    expect(answer.cursor_trace!.length).toBeLessThanOrEqual(31);
    expect(answer.cursor_trace!.length).toBeGreaterThan(20);
  });

  it("omits the cursor trace when capture is off", () => {
    const clock = new FakeClock();
    const trial = new TrialState(payload(), clock.tick, false);
    trial.markShown();
    trial.recordCursor(1, 2);
    clock.advance(50);
    const answer = trial.finish("left")!;
    expect(answer.cursor_trace).toBeUndefined();
  });
});
