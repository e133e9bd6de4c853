import type {
  DiffPayload,
  FeedbackModePayload,
  ManifestPayload,
  SnapshotSummary,
  TicketPayload,
} from "../src/api.js";

export const GUIDING_QUESTIONS = [
  "Should any properties be merged, and what would you name the merged property?",
  "Which properties should be grouped into a single unit, and how would you describe it?",
  "Are there any essential properties missing?",
  "Are the current property descriptions clear and comprehensive?",
];

export const CURRENT_SCHEMA = JSON.stringify(
  {
    type: "object",
    properties: {
      temperature: { type: "number", unit: "Celsius", description: "reactor temperature" },
      steps: { type: "array", items: { type: "object", properties: { duration: { type: "number" } } } },
    },
    required: ["temperature"],
  },
  null,
  2,
);

export const PREVIOUS_SCHEMA = JSON.stringify(
  { type: "object", properties: { temperature: { type: "string" }, pressure: { type: "number" } } },
  null,
  2,
);

export const DIFF: DiffPayload = {
  added: ["steps", "steps.[]", "steps.[].duration"],
  removed: ["pressure"],
  retyped: [{ path: "temperature", from: "string", to: "number" }],
  redescribed: [],
  moved: [{ from: "old.spot", to: "new.spot" }],
};

export function ticket(overrides: Partial<TicketPayload> = {}): TicketPayload {
  return {
    run_id: "run-x",
    stage: "Refine",
    iteration: 1,
    current: CURRENT_SCHEMA,
    previous: PREVIOUS_SCHEMA,
    diff: DIFF,
    duplicates: [
      {
        leaf_name: "uniformity",
        paths: ["observables.filmProperties.uniformity", "experimentalResults.results.filmProperties.uniformity"],
        description_similarity: 1.0,
      },
    ],
    source_doc: "paper-0",
    guiding_questions: GUIDING_QUESTIONS,
    ...overrides,
  };
}

export const COMBINED_MODE: FeedbackModePayload = { channel: "Combined", cadence: "EveryIteration" };
export const DESCRIPTIVE_MODE: FeedbackModePayload = { channel: "Descriptive", cadence: "EveryIteration" };
export const EDITED_MODE: FeedbackModePayload = { channel: "Edited", cadence: "FirstIterationOnly" };

export function manifest(overrides: Partial<ManifestPayload> = {}): ManifestPayload {
  return {
    run_id: "run-x",
    status: "AwaitingFeedback",
    feedback_mode: COMBINED_MODE,
    cursor: ["Refine", 1],
    error: null,
    created_at: "2025-01-01T00:00:00Z",
    updated_at: "2025-01-01T00:00:00Z",
    ...overrides,
  };
}

export const SNAPSHOTS: SnapshotSummary[] = [
  { stage: "Generate", iteration: 0, source_doc: null, llm_attempts: 1, created_at: "t", feedback_applied: false },
  { stage: "Refine", iteration: 1, source_doc: "paper-0", llm_attempts: 2, created_at: "t", feedback_applied: true },
];

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
