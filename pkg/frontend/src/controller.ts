/** View state and label flow for one annotation session.
 *
 * The controller never computes grounding state locally: the sidebar and
 * grounded list always mirror the last server response, and a refresh
 * re-renders purely from GET /timeline.
 */

import { ApiClient, ApiError } from "./api.js";
import {
  ACKNOWLEDGING,
  REOPENING,
  type GroundedEntry,
  type LabelPayload,
  type NewTranscript,
  type ServerState,
  type TimelineRowPayload,
  type TranscriptUtterance,
} from "./types.js";

export const NEW_CGU = "new";

export interface ComposerLabel {
  act: string;
  cgu: string | null;
  ambiguous: boolean;
  link: string | null;
}

export interface InlineError {
  uttId: number;
  messages: string[];
}

export interface ViewState {
  sessionId: string | null;
  dialogId: string;
  utterances: TranscriptUtterance[];
  rows: TimelineRowPayload[];
  server: ServerState;
  composer: ComposerLabel[];
  error: InlineError | null;
}

const EMPTY_STATE: ServerState = {
  applied: 0,
  utterance_count: 0,
  open: [],
  grounded: [],
  canceled: [],
};

export class SessionController {
  state: ViewState = {
    sessionId: null,
    dialogId: "",
    utterances: [],
    rows: [],
    server: EMPTY_STATE,
    composer: [],
    error: null,
  };

  constructor(private api: ApiClient) {}

  get cursor(): number {
    return this.state.server.applied;
  }

  get done(): boolean {
    return this.cursor >= this.state.utterances.length;
  }

  async createSession(transcript: NewTranscript): Promise<void> {
    const created = await this.api.createSession(transcript);
    await this.loadSession(created.session_id);
  }

  async loadSession(sessionId: string): Promise<void> {
    const info = await this.api.sessionInfo(sessionId);
    const timeline = await this.api.timeline(sessionId);
    this.state = {
      sessionId,
      dialogId: info.dialog_id,
      utterances: info.utterances,
      rows: timeline.rows,
      server: timeline.state,
      composer: [],
      error: null,
    };
  }

  /** Re-derive everything displayed from the server; drops nothing else. */
  async refresh(): Promise<void> {
    if (!this.state.sessionId) return;
    const timeline = await this.api.timeline(this.state.sessionId);
    this.state.rows = timeline.rows;
    this.state.server = timeline.state;
  }

  /** CGU choices the composer may offer for an act, per the server state. */
  selectableCgus(act: string): string[] {
    if (act === "None") return [];
    if (act === "Initiate") return [NEW_CGU];
    const open = this.state.server.open.map((entry) => entry.cgu);
    if (REOPENING.has(act)) {
      const grounded = this.state.server.grounded.map((entry) => entry.cgu);
      return [...open, ...grounded.filter((cgu) => !open.includes(cgu))];
    }
    return open;
  }

  /** A fresh id in the session's naming style, for Initiate labels. */
  nextCguId(): string {
    const taken = new Set<string>();
    for (const entry of this.state.server.open) taken.add(entry.cgu);
    for (const entry of this.state.server.grounded) taken.add(entry.cgu);
    for (const cgu of this.state.server.canceled) taken.add(cgu);
    for (const staged of this.state.composer) {
      if (staged.cgu) taken.add(staged.cgu);
    }
    let n = taken.size + 1;
    while (taken.has(`CGU ${n}`)) n += 1;
    return `CGU ${n}`;
  }

  stageLabel(label: ComposerLabel): boolean {
    if (!this.labelIsStageable(label)) return false;
    this.state.composer.push(label);
    return true;
  }

  labelIsStageable(label: ComposerLabel): boolean {
    if (label.act === "None") return label.cgu === null;
    if (label.act === "Initiate") return label.cgu !== null;
    if (label.ambiguous && !ACKNOWLEDGING.has(label.act)) return false;
    return label.cgu !== null && this.selectableCgus(label.act).includes(label.cgu);
  }

  clearComposer(): void {
    this.state.composer = [];
  }

  get canCommit(): boolean {
    if (this.done || this.state.composer.length === 0) return false;
    return this.state.composer.every((label) => this.labelIsStageable(label));
  }

  private payload(): LabelPayload[] {
    return this.state.composer.map((label) => ({
      act: label.act,
      cgu: label.act === "None" ? null : label.cgu,
      degree: label.ambiguous ? "Ambiguous" : null,
      link: label.link,
    }));
  }

  /** Commit the composed labels for the cursor utterance. */
  async commit(): Promise<boolean> {
    if (!this.state.sessionId || this.done) return false;
    const uttId = this.cursor;
    try {
      const response = await this.api.postLabels(
        this.state.sessionId,
        uttId,
        this.payload(),
      );
      this.state.server = response.state;
      this.state.composer = [];
      this.state.error = null;
      await this.refresh();
      return true;
    } catch (err) {
      // 409/422 land inline on the offending utterance; composer survives
      if (err instanceof ApiError) {
        this.state.error = { uttId, messages: err.errors };
        return false;
      }
      throw err;
    }
  }

  /** Replace a past utterance's labels; the server truncates and replays. */
  async revise(uttId: number, labels: LabelPayload[]): Promise<boolean> {
    if (!this.state.sessionId) return false;
    try {
      const response = await this.api.reviseLabels(
        this.state.sessionId,
        uttId,
        labels,
      );
      this.state.server = response.state;
      this.state.error = null;
      const info = await this.api.sessionInfo(this.state.sessionId);
      this.state.utterances = info.utterances; // picks up the revised flag
      await this.refresh();
      return true;
    } catch (err) {
      if (err instanceof ApiError) {
        this.state.error = { uttId, messages: err.errors };
        return false;
      }
      throw err;
    }
  }

  /** Pass-through download; byte-identical to the server's export. */
  async exportFile(format: "jsonl" | "tsv"): Promise<string> {
    if (!this.state.sessionId) throw new Error("no session");
    return this.api.exportFile(this.state.sessionId, format);
  }

  groundedEntries(): GroundedEntry[] {
    return this.state.server.grounded;
  }
}
