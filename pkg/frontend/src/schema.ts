/**
 * Wire schemas for the elicitation service API.
 *
 * Every payload crossing the HTTP boundary is validated with zod, in both
 * directions: responses before the UI touches them, and answer submissions
 * before they are sent.
 */

import { z } from "zod";

export const CriterionSchema = z.object({
  id: z.string().min(1),
  name: z.string(),
  direction: z.enum(["gain", "cost"]),
});

export const AlternativeSchema = z.object({
  id: z.string().min(1),
  name: z.string(),
  performances: z.record(z.string(), z.number().finite()),
});

export const PairPayloadSchema = z.discriminatedUnion("complete", [
  z.object({
    complete: z.literal(false),
    index: z.number().int().nonnegative(),
    budget: z.number().int().positive(),
    criteria: z.array(CriterionSchema).min(1),
    left: AlternativeSchema,
    right: AlternativeSchema,
  }),
  z.object({
    complete: z.literal(true),
    answered: z.number().int().nonnegative(),
  }),
]);
export type PairPayload = z.infer<typeof PairPayloadSchema>;
export type TrialPayload = Extract<PairPayload, { complete: false }>;

export const AnswerSchema = z
  .object({
    pair: z.tuple([z.string().min(1), z.string().min(1)]),
    choice: z.string().min(1),
    response_time_s: z.number().positive().finite(),
    attention_s: z.record(z.string(), z.number().nonnegative().finite()),
    cursor_trace: z
      .array(z.tuple([z.number(), z.number(), z.number()]))
      .optional(),
  })
  .refine((a) => a.pair[0] !== a.pair[1], { message: "pair must be distinct" })
  .refine((a) => a.pair.includes(a.choice), {
    message: "choice must be a pair member",
  });
export type Answer = z.infer<typeof AnswerSchema>;

export const SessionSnapshotSchema = z.object({
  id: z.string(),
  problem_id: z.string(),
  status: z.enum(["collecting", "inferring", "done", "failed"]),
  answered: z.number().int().nonnegative(),
  budget: z.number().int().positive(),
  progress: z.number().int().nonnegative(),
  plan: z.record(z.string(), z.unknown()),
});
export type SessionSnapshot = z.infer<typeof SessionSnapshotSchema>;

export const ResultBundleSchema = z.object({
  alternatives: z.array(z.string()).min(1),
  criteria: z.array(z.string()).min(1),
  pwi: z.array(z.array(z.number())),
  tie_share: z.array(z.array(z.number())),
  rai_percent: z.array(z.array(z.number())),
  posterior_mean: z.array(z.number()),
  hpd: z.array(z.tuple([z.number(), z.number()])),
  weight_shares: z.record(z.string(), z.number()),
  metrics: z.record(z.string(), z.number()).nullable().optional(),
  diagnostics: z.unknown().nullable().optional(),
});
export type ResultBundle = z.infer<typeof ResultBundleSchema>;

export const ResultsResponseSchema = z.discriminatedUnion("status", [
  z.object({ status: z.literal("done"), result: ResultBundleSchema }),
  z.object({ status: z.literal("failed"), diagnostics: z.unknown() }),
  z.object({
    status: z.literal("collecting"),
    progress: z.number().optional(),
    chains: z.number().optional(),
  }),
  z.object({
    status: z.literal("inferring"),
    progress: z.number().optional(),
    chains: z.number().optional(),
  }),
]);
export type ResultsResponse = z.infer<typeof ResultsResponseSchema>;
