/** Controller: polls the service, renders the current state, and submits
 * feedback. All state is reconstructable from GETs, so reloads are free. */

import { ApiError, ReviewApi, type ManifestPayload, type TicketPayload } from "./api.js";
import { buildSubmission } from "./form.js";
import {
  renderConflict,
  renderNotice,
  renderProgress,
  renderServiceDown,
  renderTicket,
} from "./render.js";

export const POLL_INTERVAL_MS = 2000;

export class ReviewApp {
  private timer: ReturnType<typeof setTimeout> | null = null;
  private submitting = false;
  private renderedTicketKey: string | null = null;

  constructor(
    private root: HTMLElement,
    private api: ReviewApi,
    private runId: string,
    private pollMs: number = POLL_INTERVAL_MS,
  ) {}

  start(): void {
    void this.refresh();
  }

  stop(): void {
    if (this.timer !== null) clearTimeout(this.timer);
    this.timer = null;
  }

  private schedule(): void {
    this.stop();
    this.timer = setTimeout(() => void this.refresh(), this.pollMs);
  }

  async refresh(): Promise<void> {
    if (this.submitting) {
      this.schedule();
      return;
    }
    let manifest: ManifestPayload;
    let ticket: TicketPayload | null;
    try {
      manifest = await this.api.getRun(this.runId);
      ticket = await this.api.getPendingTicket(this.runId);
    } catch (err) {
      this.renderedTicketKey = null;
      this.root.innerHTML = renderServiceDown(
        err instanceof Error ? err.message : String(err),
      );
      this.bindRetry();
      this.schedule();
      return;
    }

    if (ticket === null) {
      this.renderedTicketKey = null;
      const snapshots = await this.api.getSnapshots(this.runId).catch(() => []);
      this.root.innerHTML = renderProgress(manifest, snapshots);
    } else {
      const key = `${ticket.stage}/${ticket.iteration}`;
      if (this.renderedTicketKey !== key) {
        // Re-render only on a new gate so typed answers survive polling.
        this.renderedTicketKey = key;
        this.root.innerHTML = renderTicket(ticket, manifest.feedback_mode);
        this.bindForm(ticket);
      }
    }
    this.schedule();
  }

  private bindRetry(): void {
    this.root
      .querySelector<HTMLButtonElement>('[data-role="retry"]')
      ?.addEventListener("click", () => void this.refresh());
  }

  private bindForm(ticket: TicketPayload): void {
    const form = this.root.querySelector<HTMLFormElement>('[data-role="feedback-form"]');
    form?.addEventListener("submit", (event) => {
      event.preventDefault();
      void this.submit(ticket);
    });
  }

  private formError(message: string): void {
    const box = this.root.querySelector<HTMLElement>('[data-role="form-error"]');
    if (box) {
      box.textContent = message;
      box.hidden = false;
    }
  }

  async submit(ticket: TicketPayload): Promise<void> {
    const manifest = await this.api.getRun(this.runId).catch(() => null);
    if (!manifest) return;
    const answers = Array.from(
      this.root.querySelectorAll<HTMLTextAreaElement>('[data-role="answer"]'),
    ).map((area) => area.value);
    const editor = this.root.querySelector<HTMLTextAreaElement>('[data-role="editor"]');
    const editedText = editor ? editor.value : "";

    const built = buildSubmission(ticket, manifest.feedback_mode, answers, editedText);
    if (!built.submission) {
      // Nothing malformed ever leaves the browser.
      this.formError(built.error ?? "invalid feedback");
      return;
    }

    this.submitting = true;
    try {
      await this.api.submitFeedback(this.runId, built.submission);
      this.renderedTicketKey = null;
      this.root.innerHTML = renderNotice(
        `Feedback for ${ticket.stage} iteration ${ticket.iteration} accepted; ` +
          "the pipeline is resuming. Waiting for the next gate...",
      );
    } catch (err) {
      if (err instanceof ApiError && (err.status === 409 || err.code === "StaleTicket")) {
        this.renderedTicketKey = null;
        this.root.innerHTML = renderConflict(err.message);
        this.root
          .querySelector<HTMLButtonElement>('[data-role="refresh"]')
          ?.addEventListener("click", () => void this.refresh());
      } else if (err instanceof ApiError) {
        this.formError(err.message);
      } else {
        this.formError(err instanceof Error ? err.message : String(err));
      }
    } finally {
      this.submitting = false;
    }
    this.schedule();
  }
}
