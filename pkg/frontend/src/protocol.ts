/**
 * The JSON-over-WebSocket protocol spoken by `graspmap serve`.
 *
 * Every frame is one text message tagged `"v": 1`. Requests carry a
 * `type` the service dispatches on; replies reuse the request's type,
 * progress frames interleave before a solve's result, and failures
 * come back as `error` frames naming the request they answer.
 */

import { z } from "zod";

export const PROTOCOL_VERSION = 1;

const vec3 = z.tuple([z.number(), z.number(), z.number()]);
const matrix4 = z.array(z.array(z.number()).length(4)).length(4);

export const MeshPayload = z.object({
  n_vertices: z.number().int(),
  n_faces: z.number().int(),
  vertices: z.array(vec3),
  faces: z.array(z.tuple([z.number().int(), z.number().int(), z.number().int()])),
});
export type MeshPayload = z.infer<typeof MeshPayload>;

export const PatchPayload = z.object({
  label: z.string(),
  root: z.number().int(),
  boundary: z.array(z.number().int()),
  skin_root: z.number().int(),
  object_dir: vec3,
  skin_dir: vec3,
  radius_multiplier: z.number(),
  interior: z.array(z.number().int()).optional(),
});
export type PatchPayload = z.infer<typeof PatchPayload>;

export const SceneFrame = z.object({
  v: z.literal(PROTOCOL_VERSION),
  type: z.literal("scene"),
  name: z.string(),
  seed: z.number().int(),
  backend: z.string(),
  object: MeshPayload.extend({ pose: matrix4 }),
  skin: MeshPayload,
  hand: z.object({
    name: z.string(),
    n_dofs: z.number().int(),
    dof_names: z.array(z.string()),
    theta_rest: z.array(z.number()),
    // unbounded joint limits travel as null, not JSON-invalid Infinity
    theta_lower: z.array(z.number().nullable()),
    theta_upper: z.array(z.number().nullable()),
    links: z.array(MeshPayload.extend({
      name: z.string(),
      rest_transform: matrix4,
    })),
  }),
  patches: z.array(PatchPayload),
  optimizer: z.record(z.unknown()),
});
export type SceneFrame = z.infer<typeof SceneFrame>;

export const PickFrame = z.object({
  v: z.literal(PROTOCOL_VERSION),
  type: z.literal("pick"),
  patch: z.string(),
  end: z.enum(["object", "skin"]),
  root: z.number().int(),
  direction: vec3,
});
export type PickFrame = z.infer<typeof PickFrame>;

export const CorrespondencePayload = z.object({
  pairs: z.array(z.tuple([z.number().int(), z.number().int()])),
  residuals: z.array(z.number()),
  reachable: z.array(z.boolean()),
});
export type CorrespondencePayload = z.infer<typeof CorrespondencePayload>;

export const TransferFrame = z.object({
  v: z.literal(PROTOCOL_VERSION),
  type: z.literal("transfer"),
  patches: z.record(CorrespondencePayload),
  timings: z.record(z.number()),
});
export type TransferFrame = z.infer<typeof TransferFrame>;

export const ProgressFrame = z.object({
  v: z.literal(PROTOCOL_VERSION),
  type: z.literal("progress"),
  call: z.number().int(),
  iteration: z.number().int(),
  value: z.number(),
  theta: z.array(z.number()),
});
export type ProgressFrame = z.infer<typeof ProgressFrame>;

export const CallRecordPayload = z.object({
  call: z.number().int(),
  backend: z.string(),
  iterations: z.number().int(),
  // null when the call failed before completing an iteration
  best_value: z.number().nullable(),
  converged: z.boolean(),
  error: z.string().nullable(),
  theta_prior: z.array(z.number()),
  theta_star: z.array(z.number()).nullable(),
  trace: z.array(z.tuple([z.number().int(), z.number()])),
});
export type CallRecordPayload = z.infer<typeof CallRecordPayload>;

export const ResultFrame = z.object({
  v: z.literal(PROTOCOL_VERSION),
  type: z.literal("result"),
  call: z.number().int(),
  backend: z.string(),
  best_value: z.number(),
  theta_star: z.array(z.number()),
  terms: z.record(z.number()),
  mean_contact_distance: z.number(),
  record: CallRecordPayload,
  solve_seconds: z.number(),
});
export type ResultFrame = z.infer<typeof ResultFrame>;

export const PoseFrame = z.object({
  v: z.literal(PROTOCOL_VERSION),
  type: z.literal("pose"),
  theta: z.array(z.number()),
  links: z.array(matrix4),
});
export type PoseFrame = z.infer<typeof PoseFrame>;

export const HistoryFrame = z.object({
  v: z.literal(PROTOCOL_VERSION),
  type: z.literal("history"),
  backend: z.string(),
  calls: z.array(CallRecordPayload),
  best_value: z.number().nullable(),
  theta_star: z.array(z.number()).nullable(),
  results: z.array(ResultFrame.omit({ v: true })),
});
export type HistoryFrame = z.infer<typeof HistoryFrame>;

export const ErrorFrame = z.object({
  v: z.literal(PROTOCOL_VERSION),
  type: z.literal("error"),
  error: z.string(),
  in_reply_to: z.string().nullable(),
});
export type ErrorFrame = z.infer<typeof ErrorFrame>;

export const ServerFrame = z.discriminatedUnion("type", [
  SceneFrame,
  PickFrame,
  TransferFrame,
  ProgressFrame,
  ResultFrame,
  PoseFrame,
  HistoryFrame,
  ErrorFrame,
]);
export type ServerFrame = z.infer<typeof ServerFrame>;

/** Parse one incoming text frame; throws on malformed or unknown shapes. */
export function parseFrame(data: string): ServerFrame {
  return ServerFrame.parse(JSON.parse(data));
}

export type PickEnd = "object" | "skin";

export interface SolveOptions {
  priorOverride?: number[];
  iterationCap?: number;
}

export type Request =
  | { type: "scene" }
  | { type: "pick"; patch: string; end: PickEnd; root: number; toward: number }
  | { type: "transfer" }
  | { type: "solve"; prior_override?: number[]; iteration_cap?: number }
  | { type: "pose"; theta: number[] }
  | { type: "history" };

/** Serialize a request with the protocol version stamp. */
export function encodeRequest(request: Request): string {
  return JSON.stringify({ v: PROTOCOL_VERSION, ...request });
}
