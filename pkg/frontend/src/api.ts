/** Typed client for the review service HTTP API. All UI state flows through
 * these endpoints; nothing else is ever contacted. */

export interface DiffRetype {
  path: string;
  from: string;
  to: string;
}

export interface DiffMove {
  from: string;
  to: string;
}

export interface DiffPayload {
  added: string[];
  removed: string[];
  retyped: DiffRetype[];
  redescribed: string[];
  moved: DiffMove[];
}

export interface DuplicateGroupPayload {
  leaf_name: string;
  paths: string[];
  description_similarity: number;
}

export interface TicketPayload {
  run_id: string;
  stage: string;
  iteration: number;
  current: string;
  previous: string;
  diff: DiffPayload;
  duplicates: DuplicateGroupPayload[];
  source_doc: string | null;
  guiding_questions: string[];
}

export interface FeedbackModePayload {
  channel: string;
  cadence: string;
}

export interface ManifestPayload {
  run_id: string;
  status: string;
  feedback_mode: FeedbackModePayload;
  cursor: [string, number] | null;
  error: string | null;
  created_at: string;
  updated_at: string;
}

export interface SnapshotSummary {
  stage: string;
  iteration: number;
  source_doc: string | null;
  llm_attempts: number;
  created_at: string;
  feedback_applied: boolean;
}

export interface FeedbackSubmission {
  stage: string;
  iteration: number;
  descriptive?: string;
  edited_schema?: string;
  author?: string;
}

/** Error responses carry {detail: {error, message, ...}}; the message is
 * rendered to the expert verbatim. */
export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let code = `HTTP${resp.status}`;
  let message = resp.statusText;
  let detail: Record<string, unknown> = {};
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "object" && body.detail !== null) {
      detail = body.detail as Record<string, unknown>;
      code = String(detail.error ?? code);
      message = String(detail.message ?? message);
    }
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, code, message, detail);
}

export class ReviewApi {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path);
    await raiseForStatus(resp);
    return (await resp.json()) as T;
  }

  async health(): Promise<boolean> {
    try {
      const resp = await this.fetchFn(this.baseUrl + "/health");
      return resp.ok;
    } catch {
      return false;
    }
  }

  async getRuns(): Promise<ManifestPayload[]> {
    const data = await this.getJson<{ runs: ManifestPayload[] }>("/runs");
    return data.runs;
  }

  async getRun(runId: string): Promise<ManifestPayload> {
    return this.getJson<ManifestPayload>(`/runs/${encodeURIComponent(runId)}`);
  }

  async getSnapshots(runId: string): Promise<SnapshotSummary[]> {
    const data = await this.getJson<{ snapshots: SnapshotSummary[] }>(
      `/runs/${encodeURIComponent(runId)}/snapshots`,
    );
    return data.snapshots;
  }

  /** The pending review ticket, or null when no gate is open. */
  async getPendingTicket(runId: string): Promise<TicketPayload | null> {
    try {
      return await this.getJson<TicketPayload>(
        `/runs/${encodeURIComponent(runId)}/pending-review`,
      );
    } catch (err) {
      if (err instanceof ApiError && err.code === "NoPendingTicket") return null;
      throw err;
    }
  }

  async submitFeedback(
    runId: string,
    submission: FeedbackSubmission,
  ): Promise<{ status: string }> {
    const resp = await this.fetchFn(`${this.baseUrl}/runs/${encodeURIComponent(runId)}/feedback`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(submission),
    });
    await raiseForStatus(resp);
    return (await resp.json()) as { status: string };
  }
}
