/** End-to-end UI loop against the real Python review service.
 *
 * A harness process parks a live pipeline at its first review gate; this test
 * drives the whole loop through the same ReviewApi the browser uses: read the
 * ticket (diff + four verbatim questions), submit combined feedback to resume
 * the pipeline, watch the next gate arrive, and render a stale submission's
 * conflict. Everything crosses the documented HTTP interface only.
 */
// @vitest-environment jsdom
import { spawn, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

const HERE = dirname(fileURLToPath(import.meta.url));

import { ApiError, ReviewApi } from "../src/api.js";
import { ReviewApp } from "../src/app.js";
import { GUIDING_QUESTIONS } from "./fixtures.js";

const TIMEOUT = 55_000;

let child: ChildProcess | null = null;
let workdir: string;
let baseUrl = "";
let runId = "";

function startHarness(): Promise<{ port: number; run_id: string }> {
  return new Promise((resolve, reject) => {
    workdir = mkdtempSync(join(tmpdir(), "review-ui-"));
    child = spawn("python3", [join(HERE, "harness.py"), workdir], {
      stdio: ["ignore", "pipe", "inherit"],
    });
    const timer = setTimeout(() => reject(new Error("harness never became ready")), 30_000);
    let buffer = "";
    child.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      for (const line of buffer.split("\n")) {
        if (!line.trim()) continue;
        try {
          const msg = JSON.parse(line);
          if (msg.port) {
            clearTimeout(timer);
            resolve(msg);
            return;
          }
        } catch {
          // partial line; keep buffering
        }
      }
    });
    child.on("exit", (code) => reject(new Error(`harness exited early (${code})`)));
  });
}

async function until(predicate: () => Promise<boolean> | boolean, ms = 20_000): Promise<void> {
  const deadline = Date.now() + ms;
  while (!(await predicate())) {
    if (Date.now() > deadline) throw new Error("condition never became true");
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
}

beforeAll(async () => {
  const ready = await startHarness();
  baseUrl = `http://127.0.0.1:${ready.port}`;
  runId = ready.run_id;
}, 40_000);

afterAll(() => {
  child?.kill("SIGKILL");
  if (workdir) rmSync(workdir, { recursive: true, force: true });
});

describe("live review loop over HTTP", () => {
  it(
    "renders the ticket, resumes on combined feedback, and reports stale conflicts",
    async () => {
      const api = new ReviewApi(baseUrl);
      await until(async () => api.health());

      // --- The pending ticket carries the diff and the verbatim questions.
      await until(async () => (await api.getPendingTicket(runId)) !== null);
      const ticket = (await api.getPendingTicket(runId))!;
      expect(ticket.stage).toBe("Refine");
      expect(ticket.iteration).toBe(1);
      expect(ticket.guiding_questions).toEqual(GUIDING_QUESTIONS);
      expect(ticket.diff).toHaveProperty("added");

      // Render it through the real app against the real service.
      const root = document.createElement("main");
      document.body.appendChild(root);
      const app = new ReviewApp(root, api, runId, 200);
      app.start();
      await until(() => root.querySelector('[data-role="ticket"]') !== null);
      for (const question of GUIDING_QUESTIONS) {
        expect(root.innerHTML).toContain(question);
      }
      app.stop();

      // --- A stale submission (wrong iteration) renders the conflict message.
      let staleMessage = "";
      try {
        await api.submitFeedback(runId, {
          stage: "Refine",
          iteration: 99,
          descriptive: "too late",
        });
      } catch (err) {
        expect(err).toBeInstanceOf(ApiError);
        expect((err as ApiError).status).toBe(409);
        staleMessage = (err as ApiError).message;
      }
      expect(staleMessage).toMatch(/pending gate/);

      // --- A combined submission resumes the parked pipeline.
      const edited =
        '{"type":"object","properties":{"expertCurated":{"type":"string",' +
        '"description":"added by the reviewer"}}}';
      const accepted = await api.submitFeedback(runId, {
        stage: "Refine",
        iteration: 1,
        descriptive: "Q: merged? A: no, keep both.",
        edited_schema: edited,
      });
      expect(accepted.status).toBe("accepted");

      // The pipeline wakes up, produces Refine/1, and opens gate 2.
      await until(async () => {
        const next = await api.getPendingTicket(runId);
        return next !== null && next.iteration === 2;
      });
      const snapshots = await api.getSnapshots(runId);
      expect(snapshots.map((s) => `${s.stage}/${s.iteration}`)).toContain("Refine/1");

      // Double-submitting the now-pending gate conflicts exactly once.
      await api.submitFeedback(runId, { stage: "Refine", iteration: 2, descriptive: "done" });
      await expect(
        api.submitFeedback(runId, { stage: "Refine", iteration: 2, descriptive: "again" }),
      ).rejects.toMatchObject({ status: 409 });

      // The run completes: no pending gate, 1 + 2 snapshots.
      await until(async () => (await api.getRun(runId)).status === "Completed");
      expect(await api.getPendingTicket(runId)).toBeNull();
      expect((await api.getSnapshots(runId)).length).toBe(3);
    },
    TIMEOUT,
  );
});
