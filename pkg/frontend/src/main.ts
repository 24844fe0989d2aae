/** DOM wiring: reads user actions, drives the controller, re-renders. */

import { ApiClient } from "./api.js";
import { NEW_CGU, SessionController } from "./controller.js";
import {
  renderCguOptions,
  renderComposer,
  renderGroundedList,
  renderOpenSidebar,
  renderTranscript,
} from "./view.js";

const api = new ApiClient("");
const controller = new SessionController(api);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function render(): void {
  el("transcript-pane").innerHTML = renderTranscript(controller.state);
  el("open-pane").innerHTML = renderOpenSidebar(controller.state);
  el("grounded-pane").innerHTML = renderGroundedList(controller.state);
  el("composer-pane").innerHTML = renderComposer(
    controller.state,
    controller.canCommit,
  );
  el("session-meta").textContent = controller.state.sessionId
    ? `session ${controller.state.sessionId} — ${controller.state.dialogId} — ${controller.cursor}/${controller.state.utterances.length} labeled`
    : "no session";
  bindComposer();
  bindRevise();
}

function refreshCguPicker(): void {
  const actPicker = document.getElementById("act-picker") as HTMLSelectElement | null;
  const cguPicker = document.getElementById("cgu-picker") as HTMLSelectElement | null;
  if (!actPicker || !cguPicker) return;
  cguPicker.innerHTML = renderCguOptions(controller.selectableCgus(actPicker.value));
}

function bindComposer(): void {
  const actPicker = document.getElementById("act-picker") as HTMLSelectElement | null;
  if (!actPicker) return;
  refreshCguPicker();
  actPicker.addEventListener("change", refreshCguPicker);

  el<HTMLButtonElement>("stage-label").addEventListener("click", () => {
    const cguPicker = el<HTMLSelectElement>("cgu-picker");
    const ambiguous = el<HTMLInputElement>("ambiguous-toggle").checked;
    const act = actPicker.value;
    let cgu: string | null = cguPicker.value || null;
    if (act === "None") cgu = null;
    if (act === "Initiate" && (cgu === NEW_CGU || cgu === null)) {
      cgu = controller.nextCguId();
    }
    controller.stageLabel({ act, cgu, ambiguous, link: null });
    render();
  });

  for (const button of document.querySelectorAll<HTMLButtonElement>(".unstage")) {
    button.addEventListener("click", () => {
      const index = Number(button.dataset.index);
      controller.state.composer.splice(index, 1);
      render();
    });
  }

  const commit = document.getElementById("commit-labels");
  if (commit) {
    commit.addEventListener("click", () => {
      void controller.commit().then(render);
    });
  }
}

function bindRevise(): void {
  for (const button of document.querySelectorAll<HTMLButtonElement>(".revise")) {
    button.addEventListener("click", () => {
      const uttId = Number(button.dataset.utt);
      const raw = window.prompt(
        'replacement labels as JSON, e.g. [{"act": "Repair", "cgu": "CGU 1"}]',
      );
      if (raw === null) return;
      try {
        const labels = JSON.parse(raw);
        void controller.revise(uttId, labels).then(render);
      } catch {
        window.alert("that was not valid JSON");
      }
    });
  }
}

async function download(format: "jsonl" | "tsv"): Promise<void> {
  const body = await controller.exportFile(format);
  const blob = new Blob([body], { type: "text/plain;charset=utf-8" });
  const link = document.createElement("a");
  link.href = URL.createObjectURL(blob);
  link.download = `${controller.state.dialogId || "session"}.${format}`;
  link.click();
  URL.revokeObjectURL(link.href);
}

function bindChrome(): void {
  el<HTMLButtonElement>("export-jsonl").addEventListener("click", () => {
    void download("jsonl");
  });
  el<HTMLButtonElement>("export-tsv").addEventListener("click", () => {
    void download("tsv");
  });
  el<HTMLButtonElement>("refresh").addEventListener("click", () => {
    void controller.refresh().then(render);
  });

  el<HTMLButtonElement>("create-session").addEventListener("click", () => {
    const raw = el<HTMLTextAreaElement>("transcript-input").value;
    const dialogId = el<HTMLInputElement>("dialog-id-input").value.trim();
    const utterances = raw
      .split("\n")
      .map((line) => line.trim())
      .filter((line) => line.length > 0)
      .map((line) => {
        const colon = line.indexOf(":");
        if (colon < 0) return { speaker: "?", text: line };
        return {
          speaker: line.slice(0, colon).trim(),
          text: line.slice(colon + 1).trim(),
        };
      });
    if (utterances.length === 0) {
      window.alert("paste a transcript first (speaker: text, one per line)");
      return;
    }
    void controller
      .createSession({ dialog_id: dialogId || undefined, utterances })
      .then(render);
  });

  el<HTMLButtonElement>("load-session").addEventListener("click", () => {
    const sessionId = el<HTMLInputElement>("session-id-input").value.trim();
    if (!sessionId) return;
    void controller.loadSession(sessionId).then(render);
  });
}

bindChrome();
render();
