import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import { SessionController } from "../src/machine.js";
import type { Phase } from "../src/machine.js";
import { FakeClock, FakeService } from "./fake-service.js";

const SCHEDULE: Array<[string, string]> = [
  ["a1", "a3"],
  ["a2", "a5"],
  ["a4", "a6"],
];

function makeController(
  service: FakeService,
  clock = new FakeClock(),
  phases: Phase[] = [],
) {
  const api = new ApiClient("http://svc", service.fetch);
  return new SessionController(api, "s1", {
    clock: clock.tick,
    pollIntervalMs: 0,
    sleep: async () => undefined,
    onPhase: (p) => phases.push(p),
  });
}

describe("SessionController", () => {
  it("walks loading -> trial -> submitting -> ... -> complete -> results", async () => {
    const service = new FakeService(SCHEDULE);
    const clock = new FakeClock();
    const phases: Phase[] = [];
    const controller = makeController(service, clock, phases);
    await controller.start();
    while (controller.phase === "trial") {
      clock.advance(1000);
      await controller.choose("left");
    }
    expect(controller.phase).toBe("complete");
    await controller.runInference();
    expect(controller.phase).toBe("results");
    expect(service.answers).toHaveLength(3);
    expect(phases[0]).toBe("loading");
    expect(phases).toContain("submitting");
    expect(phases).toContain("inferring");
    expect(phases[phases.length - 1]).toBe("results");
  });

  it("suppresses double-clicks: one record per trial", async () => {
    const service = new FakeService(SCHEDULE);
    const clock = new FakeClock();
    const controller = makeController(service, clock);
    await controller.start();
    clock.advance(500);
    const trial = controller.trial!;
    // Two rapid clicks on the same trial object.
    const first = trial.finish("left");
    const second = trial.finish("left");
    expect(first).not.toBeNull();
    expect(second).toBeNull();
  });

  it("resyncs on 409 without duplicating records", async () => {
    const service = new FakeService(SCHEDULE);
    const clock = new FakeClock();
    const controller = makeController(service, clock);
    await controller.start();
    // Another client answers the served pair first; our submit conflicts.
    service.answerOutOfBand();
    clock.advance(700);
    await controller.choose("left");
    // Controller recovered into the next trial, nothing duplicated.
    expect(controller.phase).toBe("trial");
    expect(service.answers).toHaveLength(1);
    expect(controller.trial!.payload.index).toBe(1);
    // Finishing normally from here still completes the budget exactly.
    while (controller.phase === "trial") {
      clock.advance(300);
      await controller.choose("right");
    }
    expect(service.answers).toHaveLength(3);
  });

  it("reaches failed with diagnostics when inference fails", async () => {
    const service = new FakeService(SCHEDULE, undefined, { failInference: true });
    const clock = new FakeClock();
    const controller = makeController(service, clock);
    await controller.start();
    while (controller.phase === "trial") {
      clock.advance(100);
      await controller.choose("left");
    }
    await controller.runInference();
    expect(controller.phase).toBe("failed");
    expect(controller.failureDiagnostics).toEqual({ error: "divergent" });
    expect(controller.result).toBeNull();
  });

  it("keeps no preference state beyond the active trial (refresh-safe)", async () => {
    const service = new FakeService(SCHEDULE);
    const clock = new FakeClock();
    const first = makeController(service, clock);
    await first.start();
    clock.advance(400);
    await first.choose("left");
    // "Refresh": a brand-new controller against the same session resumes
    // at the pending pair, not at the beginning.
    const second = makeController(service, clock);
    await second.start();
    expect(second.phase).toBe("trial");
    expect(second.trial!.payload.index).toBe(1);
  });

  it("polls inference until done", async () => {
    const service = new FakeService(SCHEDULE, undefined, { pollsBeforeDone: 4 });
    const clock = new FakeClock();
    const controller = makeController(service, clock);
    await controller.start();
    while (controller.phase === "trial") {
      clock.advance(100);
      await controller.choose("left");
    }
    await controller.runInference();
    expect(controller.phase).toBe("results");
    expect(controller.result!.rai_percent).toHaveLength(10);
  });
});
