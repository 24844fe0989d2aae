/** Payload shapes of the annotation service routes the UI consumes. */

export const ACTS = [
  "Initiate",
  "Continue",
  "Explicit-Ack",
  "Repeat-Back",
  "Move-On",
  "Use",
  "Repair",
  "Request-Repair",
  "Request-Ack",
  "Cancel",
  "Repeat",
  "None",
] as const;

export type ActName = (typeof ACTS)[number];

export const ACKNOWLEDGING: ReadonlySet<string> = new Set([
  "Explicit-Ack",
  "Repeat-Back",
  "Move-On",
  "Use",
]);

export const REOPENING: ReadonlySet<string> = new Set([
  "Repair",
  "Request-Repair",
  "Request-Ack",
]);

export interface LabelPayload {
  act: string;
  cgu: string | null;
  degree: string | null;
  link: string | null;
}

export interface TranscriptUtterance {
  utt_id: number;
  speaker: string;
  text: string;
  ts: number | null;
  flags: string[];
}

export interface OpenCguEntry {
  cgu: string;
  initiated_at: number;
  initiating_text: string;
  member_count: number;
}

export interface GroundedEntry {
  cgu: string;
  degree: string;
}

/** Derived state the server attaches to every mutating response. */
export interface ServerState {
  applied: number;
  utterance_count: number;
  open: OpenCguEntry[];
  grounded: GroundedEntry[];
  canceled: string[];
}

export interface TransitionReportPayload {
  utt_id: number;
  opened: string[];
  closed: GroundedEntry[];
  reopened: string[];
  canceled: string[];
  warnings: { code: string; message: string; cgu: string | null }[];
}

export interface LabelResponse {
  report: TransitionReportPayload;
  state: ServerState;
}

export interface SessionInfo {
  session_id: string;
  dialog_id: string;
  utterances: TranscriptUtterance[];
  state: ServerState;
}

export interface TimelineRowPayload {
  utt_id: number;
  speaker: string;
  ts: number | null;
  text: string;
  labels: LabelPayload[];
  open_after: string[];
  closed_here: GroundedEntry[];
  reopened_here: string[];
  canceled_here: string[];
  warnings: { code: string; message: string }[];
}

export interface TimelinePayload {
  dialog_id: string;
  rows: TimelineRowPayload[];
  state: ServerState;
}

export interface NewTranscript {
  dialog_id?: string;
  corpus?: string;
  utterances: { speaker: string; text: string; ts?: number | null; flags?: string[] }[];
}
