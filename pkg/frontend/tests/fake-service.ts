/**
 * In-memory stand-in for the elicitation service, speaking the same HTTP
 * contract through a FetchLike. Every incoming answer is schema-validated
 * and checked against the served schedule exactly as the real server does
 * (409 on pair mismatch or exhausted budget, 422 on bad values).
 */

import { AnswerSchema, type Answer } from "../src/schema.js";
import type { FetchLike } from "../src/api.js";

export interface FakeProblem {
  criteria: Array<{ id: string; name: string; direction: "gain" | "cost" }>;
  alternatives: Array<{
    id: string;
    name: string;
    performances: Record<string, number>;
  }>;
}

export const DEFAULT_PROBLEM: FakeProblem = {
  criteria: [
    { id: "g1", name: "Calls", direction: "gain" },
    { id: "g2", name: "Data", direction: "gain" },
    { id: "g3", name: "Price", direction: "cost" },
    { id: "g4", name: "Setup fee", direction: "cost" },
    { id: "g5", name: "Monthly fee", direction: "cost" },
    { id: "g6", name: "Hotline", direction: "cost" },
  ],
  alternatives: Array.from({ length: 10 }, (_, i) => ({
    id: `a${i + 1}`,
    name: `Plan ${i + 1}`,
    performances: {
      g1: 100 * i,
      g2: 5 * (10 - i),
      g3: 0.1 + 0.05 * i,
      g4: 10 * (10 - i),
      g5: 29 + 17 * i,
      g6: 20 * i,
    },
  })),
};

function response(status: number, payload: unknown) {
  return { status, json: async () => payload };
}

export class FakeService {
  readonly answers: Answer[] = [];
  readonly invalidSubmissions: unknown[] = [];
  inferenceStarted = false;
  private pollsBeforeDone: number;

  constructor(
    private readonly schedule: Array<[string, string]>,
    private readonly problem: FakeProblem = DEFAULT_PROBLEM,
    options: { pollsBeforeDone?: number; failInference?: boolean } = {},
  ) {
    this.pollsBeforeDone = options.pollsBeforeDone ?? 1;
    this.failInference = options.failInference ?? false;
  }
  private readonly failInference: boolean;

  /** Simulates a competing client answering the current pair. */
  answerOutOfBand(): void {
    const [a, b] = this.schedule[this.answers.length]!;
    this.answers.push({
      pair: [a, b],
      choice: a,
      response_time_s: 1,
      attention_s: {},
    });
  }

  private nextPairPayload() {
    const k = this.answers.length;
    if (k >= this.schedule.length) {
      return { complete: true, answered: k };
    }
    const [left, right] = this.schedule[k]!;
    const alt = (id: string) => {
      const found = this.problem.alternatives.find((a) => a.id === id)!;
      return { id, name: found.name, performances: found.performances };
    };
    return {
      complete: false,
      index: k,
      budget: this.schedule.length,
      criteria: this.problem.criteria,
      left: alt(left),
      right: alt(right),
    };
  }

  private submit(body: unknown) {
    const parsed = AnswerSchema.safeParse(body);
    if (!parsed.success) {
      this.invalidSubmissions.push(body);
      return response(422, { detail: parsed.error.message });
    }
    const k = this.answers.length;
    if (k >= this.schedule.length) {
      return response(409, { detail: "all scheduled pairs already answered" });
    }
    const served = new Set(this.schedule[k]!);
    const got = new Set(parsed.data.pair);
    if (served.size !== got.size || [...served].some((x) => !got.has(x))) {
      return response(409, { detail: "pair mismatch" });
    }
    for (const criterion of this.problem.criteria) {
      const value = parsed.data.attention_s[criterion.id];
      if (value !== undefined && value < 0) {
        return response(422, { detail: "negative attention" });
      }
    }
    this.answers.push(parsed.data);
    return response(200, { accepted: true, answered: this.answers.length });
  }

  private resultsPayload() {
    if (!this.inferenceStarted) {
      return { status: "collecting", progress: 0 };
    }
    if (this.pollsBeforeDone > 0) {
      this.pollsBeforeDone -= 1;
      return { status: "inferring", progress: 1, chains: 3 };
    }
    if (this.failInference) {
      return { status: "failed", diagnostics: { error: "divergent" } };
    }
    const n = this.problem.alternatives.length;
    const identity = (i: number) =>
      Array.from({ length: n }, (_, j) => (i === j ? 100 : 0));
    const shares = Object.fromEntries(
      this.problem.criteria.map((c) => [c.id, 1 / this.problem.criteria.length]),
    );
    return {
      status: "done",
      result: {
        alternatives: this.problem.alternatives.map((a) => a.id),
        criteria: this.problem.criteria.map((c) => c.id),
        pwi: Array.from({ length: n }, (_, i) =>
          Array.from({ length: n }, (_, j) => (i === j ? 0 : i < j ? 0.9 : 0.1)),
        ),
        tie_share: Array.from({ length: n }, () => Array(n).fill(0)),
        rai_percent: Array.from({ length: n }, (_, i) => identity(i)),
        posterior_mean: Array(12).fill(1 / 12),
        hpd: Array.from({ length: 12 }, () => [0.01, 0.2] as [number, number]),
        weight_shares: shares,
        metrics: null,
        diagnostics: null,
      },
    };
  }

  fetch: FetchLike = async (url, init) => {
    const method = init?.method ?? "GET";
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    if (method === "POST" && path === "/sessions") {
      return response(201, {
        id: "s1",
        problem_id: "default",
        plan: {},
        status: "collecting",
        answered: this.answers.length,
        budget: this.schedule.length,
        progress: 0,
      });
    }
    if (method === "GET" && /^\/sessions\/[^/]+$/.test(path)) {
      return response(200, {
        id: "s1",
        problem_id: "default",
        plan: {},
        status: this.inferenceStarted ? "inferring" : "collecting",
        answered: this.answers.length,
        budget: this.schedule.length,
        progress: 0,
      });
    }
    if (method === "GET" && path.endsWith("/next-pair")) {
      return response(200, this.nextPairPayload());
    }
    if (method === "POST" && path.endsWith("/answers")) {
      return this.submit(JSON.parse(init?.body ?? "{}"));
    }
    if (method === "POST" && path.endsWith("/inference")) {
      if (this.answers.length === 0) {
        return response(409, { detail: "no answers to infer from" });
      }
      this.inferenceStarted = true;
      return response(202, { status: "inferring" });
    }
    if (method === "GET" && path.endsWith("/results")) {
      return response(200, this.resultsPayload());
    }
    return response(404, { detail: `no route ${method} ${path}` });
  };
}

/** Manually advanced monotonic clock for scripted timing. */
export class FakeClock {
  private now = 0;
  tick = () => this.now;
  advance(ms: number): void {
    this.now += ms;
  }
}
