/**
 * HTML renderers. Pure string producers so they are testable without a
 * DOM; `main.ts` injects them and wires events by delegation on the
 * data-* attributes emitted here.
 */

import {
  PairPayloadSchema,
  type ResultBundle,
  type TrialPayload,
} from "./schema.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function formatPerformance(value: number): string {
  return Number.isInteger(value) ? String(value) : value.toFixed(2);
}

/**
 * Performance matrix for one pair: one row per criterion (each row is a
 * hover region), the two alternatives as columns, and a choice button per
 * side underneath. Malformed payloads produce an error view and nothing
 * is ever submitted from it.
 */
export function renderTrial(payload: unknown): string {
  const parsed = PairPayloadSchema.safeParse(payload);
  if (!parsed.success || parsed.data.complete) {
    return `<div class="error" data-role="trial-error">Malformed pair payload.</div>`;
  }
  const trial: TrialPayload = parsed.data;
  const rows = trial.criteria
    .map((criterion) => {
      const left = trial.left.performances[criterion.id];
      const right = trial.right.performances[criterion.id];
      return (
        `<tr class="hover-region" data-criterion="${escapeHtml(criterion.id)}">` +
        `<th scope="row">${escapeHtml(criterion.name)}` +
        `<span class="direction">(${criterion.direction})</span></th>` +
        `<td>${left === undefined ? "?" : formatPerformance(left)}</td>` +
        `<td>${right === undefined ? "?" : formatPerformance(right)}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<div class="trial" data-index="${trial.index}" data-budget="${trial.budget}">` +
    `<p class="progress">Comparison ${trial.index + 1} of ${trial.budget}</p>` +
    `<table class="performance">` +
    `<thead><tr><th></th>` +
    `<th>${escapeHtml(trial.left.name)}</th>` +
    `<th>${escapeHtml(trial.right.name)}</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>` +
    `<div class="choices">` +
    `<button data-choice="left">Prefer ${escapeHtml(trial.left.name)}</button>` +
    `<button data-choice="right">Prefer ${escapeHtml(trial.right.name)}</button>` +
    `</div></div>`
  );
}

function matrixTable(
  title: string,
  rowLabels: string[],
  colLabels: string[],
  cells: number[][],
  format: (v: number) => string,
  cssClass: string,
): string {
  const head = colLabels.map((c) => `<th>${escapeHtml(c)}</th>`).join("");
  const body = rowLabels
    .map((label, i) => {
      const row = (cells[i] ?? [])
        .map((v) => `<td>${format(v)}</td>`)
        .join("");
      return `<tr><th scope="row">${escapeHtml(label)}</th>${row}</tr>`;
    })
    .join("");
  return (
    `<section class="${cssClass}"><h2>${escapeHtml(title)}</h2>` +
    `<table><thead><tr><th></th>${head}</tr></thead>` +
    `<tbody>${body}</tbody></table></section>`
  );
}

/**
 * Results view: rank acceptabilities as an alternatives-by-ranks
 * percentage table, the pairwise winning matrix, and weight shares as a
 * bar list. A failed inference renders its diagnostics and no tables.
 */
export function renderResults(bundle: ResultBundle | null, diagnostics?: unknown): string {
  if (bundle === null) {
    const detail = diagnostics === undefined ? "" : escapeHtml(JSON.stringify(diagnostics));
    return (
      `<div class="error" data-role="results-error">` +
      `Inference failed; no results to display.` +
      (detail ? `<pre>${detail}</pre>` : "") +
      `</div>`
    );
  }
  const n = bundle.alternatives.length;
  const ranks = Array.from({ length: n }, (_, r) => `r${r + 1}`);
  const rai = matrixTable(
    "Rank acceptability (%)",
    bundle.alternatives,
    ranks,
    bundle.rai_percent,
    (v) => v.toFixed(1),
    "rai",
  );
  const pwi = matrixTable(
    "Pairwise winning index",
    bundle.alternatives,
    bundle.alternatives,
    bundle.pwi,
    (v) => v.toFixed(2),
    "pwi",
  );
  const bars = Object.entries(bundle.weight_shares)
    .map(([criterionId, share]) => {
      const pct = (100 * share).toFixed(1);
      return (
        `<li data-criterion="${escapeHtml(criterionId)}">` +
        `<span class="label">${escapeHtml(criterionId)}</span>` +
        `<span class="bar" style="width:${pct}%"></span>` +
        `<span class="value">${pct}%</span></li>`
      );
    })
    .join("");
  return (
    `<div class="results">${rai}${pwi}` +
    `<section class="weights"><h2>Weight shares</h2><ul>${bars}</ul></section>` +
    `</div>`
  );
}
