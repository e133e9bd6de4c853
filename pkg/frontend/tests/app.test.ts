// @vitest-environment jsdom
import { afterEach, describe, expect, it } from "vitest";

import { ReviewApi, type FetchLike } from "../src/api.js";
import { ReviewApp } from "../src/app.js";
import { GUIDING_QUESTIONS, jsonResponse, manifest, ticket } from "./fixtures.js";

let app: ReviewApp | null = null;

afterEach(() => {
  app?.stop();
  app = null;
});

function mount(handler: (url: string, init?: RequestInit) => Response): {
  root: HTMLElement;
  calls: { url: string; init?: RequestInit }[];
} {
  const calls: { url: string; init?: RequestInit }[] = [];
  const fetchFn: FetchLike = async (url, init) => {
    calls.push({ url, init });
    return handler(url, init);
  };
  const root = document.createElement("main");
  document.body.innerHTML = "";
  document.body.appendChild(root);
  app = new ReviewApp(root, new ReviewApi("", fetchFn), "run-x", 5);
  return { root, calls };
}

async function until(predicate: () => boolean, ms = 3000): Promise<void> {
  const deadline = Date.now() + ms;
  while (!predicate()) {
    if (Date.now() > deadline) throw new Error("condition never became true");
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}

function fill(root: HTMLElement, answers: string[], edited?: string): void {
  root.querySelectorAll<HTMLTextAreaElement>('[data-role="answer"]').forEach((area, i) => {
    area.value = answers[i] ?? "";
  });
  const editor = root.querySelector<HTMLTextAreaElement>('[data-role="editor"]');
  if (editor && edited !== undefined) editor.value = edited;
}

function submit(root: HTMLElement): void {
  root
    .querySelector<HTMLFormElement>('[data-role="feedback-form"]')!
    .dispatchEvent(new Event("submit", { bubbles: true, cancelable: true }));
}

describe("ReviewApp", () => {
  it("renders the pending ticket with the four verbatim questions", async () => {
    const { root } = mount((url) => {
      if (url.includes("pending-review")) return jsonResponse(ticket());
      return jsonResponse(manifest());
    });
    app!.start();
    await until(() => root.querySelector('[data-role="ticket"]') !== null);
    for (const question of GUIDING_QUESTIONS) {
      expect(root.innerHTML).toContain(question);
    }
    expect(root.querySelectorAll('[data-role="answer"]')).toHaveLength(4);
  });

  it("a combined submission posts both channels and shows the resumption notice", async () => {
    let submitted: Record<string, unknown> | null = null;
    const { root } = mount((url, init) => {
      if (url.endsWith("/feedback")) {
        submitted = JSON.parse(String(init?.body));
        return jsonResponse({ status: "accepted" });
      }
      if (url.includes("pending-review")) {
        if (submitted) {
          return jsonResponse({ detail: { error: "NoPendingTicket", message: "none" } }, 404);
        }
        return jsonResponse(ticket());
      }
      if (url.endsWith("/snapshots")) return jsonResponse({ snapshots: [] });
      return jsonResponse(manifest());
    });
    app!.start();
    await until(() => root.querySelector('[data-role="feedback-form"]') !== null);
    fill(root, ["merge the pressure fields", "", "", ""], '{"type":"object","properties":{}}');
    submit(root);
    await until(() => root.querySelector('[data-role="notice"]') !== null);
    expect(submitted).not.toBeNull();
    expect(submitted!.descriptive).toContain("merge the pressure fields");
    expect(submitted!.edited_schema).toBe('{"type":"object","properties":{}}');
    // After the notice, polling lands on the progress view.
    await until(() => root.querySelector('[data-role="progress"]') !== null);
  });

  it("a malformed edit is blocked client-side with an inline error", async () => {
    const { root, calls } = mount((url) => {
      if (url.includes("pending-review")) return jsonResponse(ticket());
      return jsonResponse(manifest());
    });
    app!.start();
    await until(() => root.querySelector('[data-role="feedback-form"]') !== null);
    fill(root, ["", "", "", ""], '{"missing": ');
    submit(root);
    await until(() => {
      const box = root.querySelector<HTMLElement>('[data-role="form-error"]');
      return !!box && !box.hidden && !!box.textContent;
    });
    expect(root.querySelector('[data-role="form-error"]')!.textContent).toMatch(
      /not well-formed/,
    );
    expect(calls.some((c) => c.url.endsWith("/feedback"))).toBe(false);
  });

  it("a stale submission renders the conflict message with a refresh action", async () => {
    const { root } = mount((url, init) => {
      if (url.endsWith("/feedback")) {
        return jsonResponse(
          { detail: { error: "StaleTicket", message: "feedback for this gate was already submitted" } },
          409,
        );
      }
      if (url.includes("pending-review")) return jsonResponse(ticket());
      return jsonResponse(manifest());
    });
    app!.start();
    await until(() => root.querySelector('[data-role="feedback-form"]') !== null);
    fill(root, ["looks fine", "", "", ""]);
    submit(root);
    await until(() => root.querySelector('[data-role="conflict"]') !== null);
    expect(root.innerHTML).toContain("feedback for this gate was already submitted");
    expect(root.querySelector('[data-role="refresh"]')).not.toBeNull();
  });

  it("shows the progress timeline when no gate is open", async () => {
    const { root } = mount((url) => {
      if (url.includes("pending-review")) {
        return jsonResponse({ detail: { error: "NoPendingTicket", message: "none" } }, 404);
      }
      if (url.endsWith("/snapshots")) {
        return jsonResponse({
          snapshots: [
            { stage: "Generate", iteration: 0, source_doc: null, llm_attempts: 1, created_at: "t", feedback_applied: false },
          ],
        });
      }
      return jsonResponse(manifest({ status: "Running" }));
    });
    app!.start();
    await until(() => root.querySelector('[data-role="progress"]') !== null);
    expect(root.innerHTML).toContain("Generate");
  });

  it("shows the service-down banner and recovers on retry", async () => {
    let down = true;
    const { root } = mount((url) => {
      if (down) return new Response("boom", { status: 502 });
      if (url.includes("pending-review")) return jsonResponse(ticket());
      return jsonResponse(manifest());
    });
    app!.start();
    await until(() => root.querySelector('[data-role="service-down"]') !== null);
    down = false;
    root.querySelector<HTMLButtonElement>('[data-role="retry"]')!.click();
    await until(() => root.querySelector('[data-role="ticket"]') !== null);
  });

  it("typed answers survive polling re-renders of the same gate", async () => {
    const { root } = mount((url) => {
      if (url.includes("pending-review")) return jsonResponse(ticket());
      return jsonResponse(manifest());
    });
    app!.start();
    await until(() => root.querySelector('[data-role="answer"]') !== null);
    const area = root.querySelector<HTMLTextAreaElement>('[data-role="answer"]')!;
    area.value = "draft answer";
    await new Promise((resolve) => setTimeout(resolve, 30)); // several poll cycles
    expect(
      root.querySelector<HTMLTextAreaElement>('[data-role="answer"]')!.value,
    ).toBe("draft answer");
  });
});
