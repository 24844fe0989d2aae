import assert from "node:assert/strict";
import { test } from "node:test";

import type { ViewState } from "../src/controller.js";
import {
  escapeHtml,
  formatStamp,
  renderCguOptions,
  renderComposer,
  renderGroundedList,
  renderOpenSidebar,
  renderTranscript,
} from "../src/view.js";

function state(overrides: Partial<ViewState> = {}): ViewState {
  return {
    sessionId: "s1",
    dialogId: "d1",
    utterances: [
      { utt_id: 0, speaker: "User1", text: "And I see one stone only", ts: null, flags: [] },
      { utt_id: 1, speaker: "User2", text: "Only one?", ts: null, flags: [] },
    ],
    rows: [],
    server: { applied: 0, utterance_count: 2, open: [], grounded: [], canceled: [] },
    composer: [],
    error: null,
    ...overrides,
  };
}

test("escapeHtml neutralizes markup", () => {
  assert.equal(escapeHtml(`<b a="c">&`), "&lt;b a=&quot;c&quot;&gt;&amp;");
});

test("stamps render mm:ss", () => {
  assert.equal(formatStamp(69), "[01:09]");
  assert.equal(formatStamp(null), "");
});

test("transcript marks the cursor and shows committed acts", () => {
  const view = state({
    rows: [
      {
        utt_id: 0,
        speaker: "User1",
        ts: null,
        text: "And I see one stone only",
        labels: [{ act: "Initiate", cgu: "CGU 1", degree: null, link: null }],
        open_after: ["CGU 1"],
        closed_here: [],
        reopened_here: [],
        canceled_here: [],
        warnings: [],
      },
    ],
    server: { applied: 1, utterance_count: 2, open: [], grounded: [], canceled: [] },
  });
  const html = renderTranscript(view);
  assert.match(html, /data-utt="1" [^>]*|class="[^"]*current/);
  assert.ok(html.includes("Initiate (CGU 1)"));
  assert.ok(html.includes('class="utterance current" data-utt="1"'));
  assert.ok(html.includes('<button class="revise" data-utt="0">'));
});

test("inline errors attach to the offending utterance only", () => {
  const html = renderTranscript(
    state({ error: { uttId: 0, messages: ["no such CGU: 'ghost'"] } }),
  );
  assert.ok(html.includes("inline-error"));
  assert.ok(html.includes("no such CGU"));
});

test("open sidebar lists id, origin text, and member count", () => {
  const html = renderOpenSidebar(
    state({
      server: {
        applied: 1,
        utterance_count: 2,
        open: [{ cgu: "CGU 1", initiated_at: 0, initiating_text: "And I see one stone only", member_count: 3 }],
        grounded: [],
        canceled: [],
      },
    }),
  );
  assert.ok(html.includes("CGU 1"));
  assert.ok(html.includes("And I see one stone only"));
  assert.ok(html.includes("3 members"));
});

test("grounded list color-codes each degree", () => {
  const html = renderGroundedList(
    state({
      server: {
        applied: 2,
        utterance_count: 2,
        open: [],
        grounded: [
          { cgu: "CGU 1", degree: "High" },
          { cgu: "CGU 2", degree: "Medium" },
          { cgu: "CGU 3", degree: "Low" },
          { cgu: "CGU 4", degree: "Ambiguous" },
        ],
        canceled: ["CGU 5"],
      },
    }),
  );
  for (const klass of ["badge-high", "badge-medium", "badge-low", "badge-ambiguous", "badge-canceled"]) {
    assert.ok(html.includes(klass), klass);
  }
});

test("composer disables commit until told otherwise", () => {
  const enabled = renderComposer(state(), true);
  const disabled = renderComposer(state(), false);
  assert.ok(enabled.includes('<button id="commit-labels" >'));
  assert.ok(disabled.includes('<button id="commit-labels" disabled>'));
});

test("composer offers all twelve acts", () => {
  const html = renderComposer(state(), false);
  const count = (html.match(/<option value="/g) ?? []).length;
  assert.equal(count, 12);
});

test("empty cgu choice renders a disabled placeholder", () => {
  assert.ok(renderCguOptions([]).includes("disabled"));
  assert.ok(renderCguOptions(["CGU 1"]).includes('value="CGU 1"'));
});
