/**
 * Browser entry point: binds the session controller to the DOM.
 *
 * Hover measurement uses pointerenter/pointerleave on each criterion row;
 * all timing flows through performance.now() via the TrialState clock.
 */

import { ApiClient } from "./api.js";
import { SessionController } from "./machine.js";
import { renderResults, renderTrial } from "./render.js";

interface AppConfig {
  baseUrl: string;
  plan?: Record<string, unknown>;
  captureCursor?: boolean;
}

export async function mount(root: HTMLElement, config: AppConfig): Promise<void> {
  const api = new ApiClient(config.baseUrl);
  const session = await api.createSession(config.plan ?? {});
  const controller = new SessionController(api, session.id, {
    captureCursor: config.captureCursor ?? false,
    onPhase: () => render(),
  });

  function render(): void {
    switch (controller.phase) {
      case "loading":
        root.innerHTML = `<p class="status">Loading…</p>`;
        return;
      case "trial":
        root.innerHTML = renderTrial(controller.trial?.payload);
        bindTrial();
        return;
      case "submitting":
        root.innerHTML = `<p class="status">Saving…</p>`;
        return;
      case "complete":
        root.innerHTML =
          `<p class="status">All comparisons answered.</p>` +
          `<button data-role="infer">Compute ranking</button>`;
        root
          .querySelector("[data-role=infer]")
          ?.addEventListener("click", () => void controller.runInference());
        return;
      case "inferring":
        root.innerHTML = `<p class="status">Inferring preferences…</p>`;
        return;
      case "results":
        root.innerHTML = renderResults(controller.result);
        return;
      case "failed":
        root.innerHTML = renderResults(null, controller.failureDiagnostics);
        return;
      case "error":
        root.innerHTML =
          `<div class="error">${controller.lastError ?? "Unknown error"}</div>` +
          `<button data-role="retry">Retry</button>`;
        root
          .querySelector("[data-role=retry]")
          ?.addEventListener("click", () => void controller.start());
        return;
    }
  }

  function bindTrial(): void {
    const trial = controller.trial;
    if (trial === null) return;
    for (const row of root.querySelectorAll<HTMLElement>("[data-criterion]")) {
      const id = row.dataset.criterion!;
      row.addEventListener("pointerenter", () => trial.hoverEnter(id));
      row.addEventListener("pointerleave", () => trial.hoverLeave(id));
    }
    root.addEventListener("pointermove", (event) => {
      trial.recordCursor(event.clientX, event.clientY);
    });
    for (const button of root.querySelectorAll<HTMLButtonElement>("[data-choice]")) {
      button.addEventListener("click", () => {
        void controller.choose(button.dataset.choice as "left" | "right");
      });
    }
  }

  await controller.start();
}
