import { describe, expect, it } from "vitest";

import {
  renderDiff,
  renderDuplicates,
  renderProgress,
  renderRunPicker,
  renderSchemaTree,
  renderServiceDown,
  renderTicket,
} from "../src/render.js";
import {
  COMBINED_MODE,
  DESCRIPTIVE_MODE,
  DIFF,
  EDITED_MODE,
  GUIDING_QUESTIONS,
  SNAPSHOTS,
  manifest,
  ticket,
} from "./fixtures.js";

describe("renderTicket", () => {
  it("shows the four guiding questions verbatim", () => {
    const html = renderTicket(ticket(), COMBINED_MODE);
    for (const question of GUIDING_QUESTIONS) {
      expect(html).toContain(question);
    }
    expect(html.match(/data-role="answer"/g)).toHaveLength(4);
  });

  it("shows stage, iteration, and upcoming paper", () => {
    const html = renderTicket(ticket(), COMBINED_MODE);
    expect(html).toContain("Refine iteration 1");
    expect(html).toContain("paper-0");
  });

  it("renders both schema columns", () => {
    const html = renderTicket(ticket(), COMBINED_MODE);
    expect(html).toContain("Previous schema");
    expect(html).toContain("Current schema");
    expect(html).toContain("temperature");
  });

  it("combined mode shows questions and editor", () => {
    const html = renderTicket(ticket(), COMBINED_MODE);
    expect(html).toContain('data-role="questions"');
    expect(html).toContain('data-role="editor"');
  });

  it("descriptive mode hides the editor", () => {
    const html = renderTicket(ticket(), DESCRIPTIVE_MODE);
    expect(html).toContain('data-role="questions"');
    expect(html).not.toContain('data-role="editor"');
  });

  it("edited mode hides the questions", () => {
    const html = renderTicket(ticket(), EDITED_MODE);
    expect(html).not.toContain('data-role="questions"');
    expect(html).toContain('data-role="editor"');
  });

  it("surfaces duplicate warnings with their paths", () => {
    const html = renderTicket(ticket(), COMBINED_MODE);
    expect(html).toContain('data-role="duplicates"');
    expect(html).toContain("observables.filmProperties.uniformity");
    expect(html).toContain("experimentalResults.results.filmProperties.uniformity");
  });
});

describe("renderDiff", () => {
  it("classifies every change kind", () => {
    const html = renderDiff(DIFF);
    expect(html).toContain('class="diff-added"');
    expect(html).toContain('class="diff-removed"');
    expect(html).toContain('class="diff-moved"');
    expect(html).toContain('class="diff-retyped"');
    expect(html).toContain("steps.[].duration");
    expect(html).toContain("old.spot");
  });

  it("empty diff reads as no changes", () => {
    const html = renderDiff({ added: [], removed: [], retyped: [], redescribed: [], moved: [] });
    expect(html).toContain("No structural changes");
  });
});

describe("renderSchemaTree", () => {
  it("renders typed, unit-annotated, collapsible nodes", () => {
    const html = renderSchemaTree(ticket().current);
    expect(html).toContain("type-number");
    expect(html).toContain("Celsius");
    expect(html).toContain("<details");
    expect(html).toContain("required");
  });

  it("falls back to raw text for unparseable schemas", () => {
    expect(renderSchemaTree("not json")).toContain("schema-raw");
  });

  it("escapes html in descriptions", () => {
    const html = renderSchemaTree(
      JSON.stringify({
        type: "object",
        properties: { x: { type: "string", description: "<script>alert(1)</script>" } },
      }),
    );
    expect(html).not.toContain("<script>");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("renderDuplicates", () => {
  it("empty when no groups", () => {
    expect(renderDuplicates([])).toBe("");
  });
});

describe("progress and chrome", () => {
  it("renders the snapshot timeline when no ticket is pending", () => {
    const html = renderProgress(manifest({ status: "Running" }), SNAPSHOTS);
    expect(html).toContain('data-role="progress"');
    expect(html).toContain("Generate");
    expect(html).toContain("paper-0");
    expect(html).toContain("Running");
  });

  it("service-down banner offers a retry", () => {
    const html = renderServiceDown("connect ECONNREFUSED");
    expect(html).toContain('data-role="service-down"');
    expect(html).toContain('data-role="retry"');
    expect(html).toContain("ECONNREFUSED");
  });

  it("run picker links to each run", () => {
    const html = renderRunPicker([manifest({ run_id: "r1" }), manifest({ run_id: "r2" })]);
    expect(html).toContain("?run=r1");
    expect(html).toContain("?run=r2");
  });
});
