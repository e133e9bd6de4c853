/** Feedback form logic: the four question textareas fold into one descriptive
 * text, and edited schemas must be well-formed JSON before anything is sent. */

import type { FeedbackModePayload, FeedbackSubmission, TicketPayload } from "./api.js";

export function allowsDescriptive(mode: FeedbackModePayload): boolean {
  return mode.channel === "Descriptive" || mode.channel === "Combined";
}

export function allowsEdited(mode: FeedbackModePayload): boolean {
  return mode.channel === "Edited" || mode.channel === "Combined";
}

/** Non-empty answers become one labeled Q/A text; null when nothing was written. */
export function combineAnswers(questions: string[], answers: string[]): string | null {
  const parts: string[] = [];
  questions.forEach((question, i) => {
    const answer = (answers[i] ?? "").trim();
    if (answer) {
      parts.push(`Q: ${question}\nA: ${answer}`);
    }
  });
  return parts.length ? parts.join("\n\n") : null;
}

export interface JsonCheck {
  ok: boolean;
  error?: string;
  line?: number;
  column?: number;
}

/** Client-side well-formedness gate; nothing malformed leaves the browser. */
export function checkJsonWellFormed(text: string): JsonCheck {
  try {
    JSON.parse(text);
    return { ok: true };
  } catch (err) {
    const message = err instanceof Error ? err.message : String(err);
    const at = /position (\d+)/.exec(message);
    if (at) {
      const pos = Number(at[1]);
      const before = text.slice(0, pos);
      const line = before.split("\n").length;
      const column = pos - before.lastIndexOf("\n");
      return { ok: false, error: message, line, column };
    }
    return { ok: false, error: message };
  }
}

export interface BuildResult {
  submission?: FeedbackSubmission;
  error?: string;
  errorLine?: number;
}

/** Assemble the POST body from form state, enforcing the run's channel. */
export function buildSubmission(
  ticket: TicketPayload,
  mode: FeedbackModePayload,
  answers: string[],
  editedText: string,
): BuildResult {
  const descriptive = allowsDescriptive(mode)
    ? combineAnswers(ticket.guiding_questions, answers)
    : null;

  let edited: string | null = null;
  if (allowsEdited(mode) && editedText.trim()) {
    const check = checkJsonWellFormed(editedText);
    if (!check.ok) {
      return {
        error: `edited schema is not well-formed JSON: ${check.error ?? "parse error"}`,
        errorLine: check.line,
      };
    }
    edited = editedText;
  }

  if (descriptive === null && edited === null) {
    return { error: "write an answer or edit the schema before submitting" };
  }
  const submission: FeedbackSubmission = {
    stage: ticket.stage,
    iteration: ticket.iteration,
  };
  if (descriptive !== null) submission.descriptive = descriptive;
  if (edited !== null) submission.edited_schema = edited;
  return { submission };
}
