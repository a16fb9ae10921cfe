/**
 * Session view model: a pure reducer over wire messages and local events.
 *
 * The UI never interprets the conversation itself; everything it shows
 * is a fold over what the service said.
 */

import type {
  DegreeName,
  ResponseTypeName,
  ServerMessage,
} from "./protocol.js";

export interface TranscriptEntry {
  who: "user" | "robot";
  text: string;
  responseType?: ResponseTypeName;
}

export interface WatchState {
  deadlineS: number;
  stage: number;
}

export interface DiagnosisState {
  blockIndex: number;
  final: DegreeName;
  perClassifier: Record<string, readonly number[]>;
  votes: readonly DegreeName[];
  tieBroken: boolean;
}

export type SessionPhase = "idle" | "live" | "ended";

export interface SessionView {
  phase: SessionPhase;
  sessionId: string | null;
  silenceThresholdS: number | null;
  blockSizePairs: number | null;
  transcript: readonly TranscriptEntry[];
  watch: WatchState | null;
  diagnoses: readonly DiagnosisState[];
  lastError: { code: string; message: string } | null;
  errorCount: number;
}

export const initialView: SessionView = {
  phase: "idle",
  sessionId: null,
  silenceThresholdS: null,
  blockSizePairs: null,
  transcript: [],
  watch: null,
  diagnoses: [],
  lastError: null,
  errorCount: 0,
};

export type ViewEvent =
  | { kind: "server"; message: ServerMessage }
  | { kind: "sent"; text: string }
  | { kind: "closed" };

function applyServer(view: SessionView, msg: ServerMessage): SessionView {
  switch (msg.type) {
    case "welcome":
      return {
        ...view,
        phase: "live",
        sessionId: msg.session_id,
        silenceThresholdS: msg.silence_threshold_s ?? null,
        blockSizePairs: msg.block_size_pairs ?? null,
      };
    case "response":
      return {
        ...view,
        transcript: [
          ...view.transcript,
          { who: "robot", text: msg.text, responseType: msg.response_type },
        ],
      };
    case "silence_watch":
      return { ...view, watch: { deadlineS: msg.deadline_s, stage: msg.stage } };
    case "diagnosis":
      return {
        ...view,
        diagnoses: [
          ...view.diagnoses,
          {
            blockIndex: msg.block_index,
            final: msg.final,
            perClassifier: msg.per_classifier,
            votes: msg.votes,
            tieBroken: msg.tie_broken,
          },
        ],
      };
    case "error":
      return {
        ...view,
        lastError: { code: msg.code, message: msg.message },
        errorCount: view.errorCount + 1,
      };
  }
}

export function reduce(view: SessionView, event: ViewEvent): SessionView {
  switch (event.kind) {
    case "server":
      return applyServer(view, event.message);
    case "sent":
      return {
        ...view,
        transcript: [...view.transcript, { who: "user", text: event.text }],
      };
    case "closed":
      return { ...view, phase: "ended", watch: null };
  }
}

/** The verdict to display: the latest block's, if any arrived yet. */
export function latestDiagnosis(view: SessionView): DiagnosisState | null {
  return view.diagnoses.length > 0
    ? (view.diagnoses[view.diagnoses.length - 1] as DiagnosisState)
    : null;
}
