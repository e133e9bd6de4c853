/** Pure HTML renderers. Everything here is a string-in/string-out function so
 * the view layer stays trivially testable; app.ts owns the DOM. */

import type {
  DiffPayload,
  DuplicateGroupPayload,
  FeedbackModePayload,
  ManifestPayload,
  SnapshotSummary,
  TicketPayload,
} from "./api.js";
import { allowsDescriptive, allowsEdited } from "./form.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

// ---------------------------------------------------------------------------
// Schema tree

interface SchemaNodeJson {
  type?: string;
  description?: string;
  unit?: string;
  properties?: Record<string, SchemaNodeJson>;
  items?: SchemaNodeJson;
  required?: string[];
  enum?: unknown[];
  minimum?: number;
  maximum?: number;
  [key: string]: unknown;
}

function renderNode(name: string, node: SchemaNodeJson, required: boolean): string {
  const type = escapeHtml(node.type ?? "?");
  const badges: string[] = [`<span class="type type-${type}">${type}</span>`];
  if (node.unit) badges.push(`<span class="unit">${escapeHtml(node.unit)}</span>`);
  if (required) badges.push(`<span class="required">required</span>`);
  const desc = node.description
    ? `<span class="desc">${escapeHtml(node.description)}</span>`
    : "";
  const label =
    `<span class="prop-name">${escapeHtml(name)}</span> ${badges.join(" ")} ${desc}`;

  const children: string[] = [];
  if (node.properties) {
    const req = new Set(node.required ?? []);
    for (const [childName, child] of Object.entries(node.properties).sort()) {
      children.push(renderNode(childName, child, req.has(childName)));
    }
  }
  if (node.items) {
    children.push(renderNode("[]", node.items, false));
  }
  if (!children.length) {
    return `<li class="leaf">${label}</li>`;
  }
  return (
    `<li><details open><summary>${label}</summary>` +
    `<ul class="schema-tree">${children.join("")}</ul></details></li>`
  );
}

/** Collapsible tree for one schema document (canonical JSON text). */
export function renderSchemaTree(schemaText: string): string {
  let root: SchemaNodeJson;
  try {
    root = JSON.parse(schemaText) as SchemaNodeJson;
  } catch {
    return `<pre class="schema-raw">${escapeHtml(schemaText)}</pre>`;
  }
  const req = new Set(root.required ?? []);
  const children = Object.entries(root.properties ?? {})
    .sort()
    .map(([name, node]) => renderNode(name, node, req.has(name)));
  if (!children.length) {
    return `<p class="empty">(empty object schema)</p>`;
  }
  return `<ul class="schema-tree root">${children.join("")}</ul>`;
}

// ---------------------------------------------------------------------------
// Diff, duplicates, progress

export function renderDiff(diff: DiffPayload): string {
  const rows: string[] = [];
  for (const path of diff.added) {
    rows.push(`<li class="diff-added">+ ${escapeHtml(path)}</li>`);
  }
  for (const path of diff.removed) {
    rows.push(`<li class="diff-removed">- ${escapeHtml(path)}</li>`);
  }
  for (const move of diff.moved) {
    rows.push(
      `<li class="diff-moved">&#8594; ${escapeHtml(move.from)} moved to ${escapeHtml(move.to)}</li>`,
    );
  }
  for (const change of diff.retyped) {
    rows.push(
      `<li class="diff-retyped">&#9888; ${escapeHtml(change.path)} retyped ` +
        `${escapeHtml(change.from)} &#8594; ${escapeHtml(change.to)}</li>`,
    );
  }
  for (const path of diff.redescribed) {
    rows.push(`<li class="diff-redescribed">&#9998; ${escapeHtml(path)} description changed</li>`);
  }
  if (!rows.length) {
    return `<p class="empty">No structural changes since the previous snapshot.</p>`;
  }
  return `<ul class="diff-list">${rows.join("")}</ul>`;
}

export function renderDuplicates(groups: DuplicateGroupPayload[]): string {
  if (!groups.length) return "";
  const items = groups
    .map(
      (g) =>
        `<li><strong>${escapeHtml(g.leaf_name)}</strong> appears at: ` +
        g.paths.map((p) => `<code>${escapeHtml(p)}</code>`).join(", ") +
        ` (similarity ${g.description_similarity.toFixed(2)})</li>`,
    )
    .join("");
  return (
    `<div class="banner banner-warn" data-role="duplicates">` +
    `<strong>Possible duplicated properties</strong><ul>${items}</ul></div>`
  );
}

export function renderProgress(
  manifest: ManifestPayload,
  snapshots: SnapshotSummary[],
): string {
  const rows = snapshots
    .map(
      (s) =>
        `<tr><td>${escapeHtml(s.stage)}</td><td>${s.iteration}</td>` +
        `<td>${escapeHtml(s.source_doc ?? "-")}</td>` +
        `<td>${s.llm_attempts}</td><td>${s.feedback_applied ? "yes" : "no"}</td></tr>`,
    )
    .join("");
  return `
    <section class="progress" data-role="progress">
      <h2>Run ${escapeHtml(manifest.run_id)} &#8212; ${escapeHtml(manifest.status)}</h2>
      <p>No review is pending. Snapshot timeline:</p>
      <table>
        <thead><tr><th>stage</th><th>iteration</th><th>paper</th><th>attempts</th><th>feedback</th></tr></thead>
        <tbody>${rows || '<tr><td colspan="5">no snapshots yet</td></tr>'}</tbody>
      </table>
    </section>`;
}

// ---------------------------------------------------------------------------
// The ticket view

export function renderTicket(
  ticket: TicketPayload,
  mode: FeedbackModePayload,
): string {
  const questions = ticket.guiding_questions
    .map(
      (q, i) => `
      <label class="question">
        <span>${i + 1}. ${escapeHtml(q)}</span>
        <textarea data-role="answer" data-index="${i}" rows="2"></textarea>
      </label>`,
    )
    .join("");

  const descriptiveBlock = allowsDescriptive(mode)
    ? `<fieldset class="questions" data-role="questions">
         <legend>Guiding questions</legend>${questions}</fieldset>`
    : "";
  const editorBlock = allowsEdited(mode)
    ? `<fieldset class="editor">
         <legend>Edit the schema directly (optional)</legend>
         <textarea data-role="editor" rows="14" spellcheck="false">${escapeHtml(ticket.current)}</textarea>
         <p class="hint" data-role="editor-hint"></p>
       </fieldset>`
    : "";

  return `
    <section class="ticket" data-role="ticket">
      <header>
        <h2>Review gate: ${escapeHtml(ticket.stage)} iteration ${ticket.iteration}</h2>
        <p>Next paper: <code>${escapeHtml(ticket.source_doc ?? "?")}</code>
           &#8212; feedback channel: ${escapeHtml(mode.channel)} / ${escapeHtml(mode.cadence)}</p>
      </header>
      ${renderDuplicates(ticket.duplicates)}
      <div class="columns">
        <div class="col">
          <h3>Previous schema</h3>${renderSchemaTree(ticket.previous)}
        </div>
        <div class="col">
          <h3>Current schema</h3>${renderSchemaTree(ticket.current)}
        </div>
      </div>
      <h3>Changes</h3>
      ${renderDiff(ticket.diff)}
      <form data-role="feedback-form">
        ${descriptiveBlock}
        ${editorBlock}
        <p class="form-error" data-role="form-error" hidden></p>
        <button type="submit" data-role="submit">Submit feedback &amp; resume</button>
      </form>
    </section>`;
}

export function renderServiceDown(detail: string): string {
  return `
    <div class="banner banner-error" data-role="service-down">
      <strong>Review service unreachable.</strong>
      <span>${escapeHtml(detail)}</span>
      <button type="button" data-role="retry">Retry</button>
    </div>`;
}

export function renderNotice(text: string): string {
  return `<div class="banner banner-ok" data-role="notice">${escapeHtml(text)}</div>`;
}

export function renderConflict(text: string): string {
  return `
    <div class="banner banner-warn" data-role="conflict">
      <strong>Submission conflict.</strong> <span>${escapeHtml(text)}</span>
      <button type="button" data-role="refresh">Refresh ticket</button>
    </div>`;
}

export function renderRunPicker(runs: ManifestPayload[]): string {
  if (!runs.length) {
    return `<p class="empty">No runs in the store yet.</p>`;
  }
  const items = runs
    .map(
      (r) =>
        `<li><a href="?run=${encodeURIComponent(r.run_id)}">${escapeHtml(r.run_id)}</a> ` +
        `&#8212; ${escapeHtml(r.status)}</li>`,
    )
    .join("");
  return `<section data-role="run-picker"><h2>Runs</h2><ul>${items}</ul></section>`;
}
