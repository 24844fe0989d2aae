/** Pure HTML renderers; main.ts binds them to the document. */

import type { ViewState } from "./controller.js";
import { ACTS, type TranscriptUtterance } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function formatStamp(ts: number | null): string {
  if (ts === null) return "";
  const total = Math.round(ts);
  const minutes = Math.floor(total / 60);
  const seconds = total % 60;
  return `[${String(minutes).padStart(2, "0")}:${String(seconds).padStart(2, "0")}]`;
}

function flagMarks(utt: TranscriptUtterance): string {
  let marks = "";
  if (utt.flags.includes("revised")) marks += "*";
  if (utt.flags.includes("overlap")) marks += "#";
  if (utt.flags.includes("murmur")) marks += "m";
  return marks;
}

export function renderTranscript(state: ViewState): string {
  const cursor = state.server.applied;
  const rowByUtt = new Map(state.rows.map((row) => [row.utt_id, row]));
  const items = state.utterances.map((utt) => {
    const row = rowByUtt.get(utt.utt_id);
    const classes = ["utterance"];
    if (utt.utt_id === cursor) classes.push("current");
    if (utt.utt_id < cursor) classes.push("labeled");
    const acts = row
      ? row.labels
          .map((label) =>
            label.cgu ? `${label.act} (${escapeHtml(label.cgu)})` : label.act,
          )
          .join("; ")
      : "";
    const marks = flagMarks(utt);
    const error =
      state.error && state.error.uttId === utt.utt_id
        ? `<div class="inline-error">${state.error.messages
            .map(escapeHtml)
            .join("<br>")}</div>`
        : "";
    return `<li class="${classes.join(" ")}" data-utt="${utt.utt_id}">
      <span class="stamp">${formatStamp(utt.ts)}</span>
      <span class="speaker">${escapeHtml(utt.speaker)}${marks ? `<sup class="flags">${marks}</sup>` : ""}</span>
      <span class="text">${escapeHtml(utt.text)}</span>
      <span class="acts">${escapeHtml(acts)}</span>
      ${utt.utt_id < cursor ? `<button class="revise" data-utt="${utt.utt_id}">revise</button>` : ""}
      ${error}
    </li>`;
  });
  return `<ul class="transcript">${items.join("\n")}</ul>`;
}

export function renderOpenSidebar(state: ViewState): string {
  if (state.server.open.length === 0) {
    return `<p class="empty">no open CGUs</p>`;
  }
  const items = state.server.open.map(
    (entry) => `<li class="open-cgu" data-cgu="${escapeHtml(entry.cgu)}">
      <span class="cgu-id">${escapeHtml(entry.cgu)}</span>
      <span class="cgu-origin">${escapeHtml(entry.initiating_text)}</span>
      <span class="cgu-members">${entry.member_count} member${entry.member_count === 1 ? "" : "s"}</span>
    </li>`,
  );
  return `<ul class="open-list">${items.join("\n")}</ul>`;
}

export function renderGroundedList(state: ViewState): string {
  const grounded = state.server.grounded.map(
    (entry) => `<li class="grounded-cgu" data-cgu="${escapeHtml(entry.cgu)}">
      <span class="cgu-id">${escapeHtml(entry.cgu)}</span>
      <span class="badge badge-${entry.degree.toLowerCase()}">${entry.degree}</span>
    </li>`,
  );
  const canceled = state.server.canceled.map(
    (cgu) => `<li class="canceled-cgu" data-cgu="${escapeHtml(cgu)}">
      <span class="cgu-id">${escapeHtml(cgu)}</span>
      <span class="badge badge-canceled">canceled</span>
    </li>`,
  );
  if (grounded.length + canceled.length === 0) {
    return `<p class="empty">nothing grounded yet</p>`;
  }
  return `<ul class="grounded-list">${[...grounded, ...canceled].join("\n")}</ul>`;
}

export function renderComposer(state: ViewState, canCommit: boolean): string {
  const current = state.utterances[state.server.applied];
  if (!current) {
    return `<p class="empty">transcript fully labeled; export when ready</p>`;
  }
  const options = ACTS.map(
    (act) => `<option value="${act}">${act}</option>`,
  ).join("");
  const staged = state.composer.map(
    (label, index) => `<li class="staged" data-index="${index}">
      ${label.act}${label.cgu ? ` on ${escapeHtml(label.cgu)}` : ""}${label.ambiguous ? " (Ambiguous)" : ""}${label.link ? ` link ${escapeHtml(label.link)}` : ""}
      <button class="unstage" data-index="${index}">remove</button>
    </li>`,
  );
  return `<div class="composer">
    <p class="target">labeling utterance ${current.utt_id}: <em>${escapeHtml(current.text)}</em></p>
    <select id="act-picker">${options}</select>
    <select id="cgu-picker"></select>
    <label><input type="checkbox" id="ambiguous-toggle"> Ambiguous</label>
    <button id="stage-label">add</button>
    <ul class="staged-labels">${staged.join("\n")}</ul>
    <button id="commit-labels" ${canCommit ? "" : "disabled"}>commit</button>
  </div>`;
}

export function renderCguOptions(choices: string[]): string {
  if (choices.length === 0) {
    return `<option value="" disabled selected>no CGU applies</option>`;
  }
  return choices
    .map((cgu) => `<option value="${escapeHtml(cgu)}">${escapeHtml(cgu)}</option>`)
    .join("");
}
