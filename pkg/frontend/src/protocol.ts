/**
 * Wire protocol codec: canonical newline-delimited JSON.
 *
 * Byte-compatible with the session service encoder: keys sorted by code
 * point, compact separators, numbers rounded to 4 decimals with integral
 * values emitted as integers. The service and this module must produce
 * identical bytes for the same message; the fixture tests pin that.
 */

export const WIRE_DECIMALS = 4;

export const DEGREE_NAMES = ["non_ad", "mild", "moderate", "severe"] as const;
export type DegreeName = (typeof DEGREE_NAMES)[number];

export const RESPONSE_TYPE_NAMES = [
  "answer",
  "question_on_focus",
  "partial_repeat",
  "follow_up_question",
  "topic_introduction",
  "formulaic_response",
] as const;
export type ResponseTypeName = (typeof RESPONSE_TYPE_NAMES)[number];

export class ProtocolError extends Error {}

export type ClientMessage =
  | { type: "hello"; client: string }
  | {
      type: "utterance";
      text: string;
      t_start?: number;
      t_end?: number;
      audio_b64?: string;
    }
  | { type: "bye" };

export interface WelcomeMessage {
  type: "welcome";
  session_id: string;
  silence_threshold_s?: number;
  block_size_pairs?: number;
}

export interface ResponseMessage {
  type: "response";
  response_type: ResponseTypeName;
  text: string;
}

export interface SilenceWatchMessage {
  type: "silence_watch";
  deadline_s: number;
  stage: number;
}

export interface DiagnosisMessage {
  type: "diagnosis";
  block_index: number;
  final: DegreeName;
  per_classifier: Record<string, number[]>;
  votes: DegreeName[];
  tie_broken: boolean;
}

export interface ErrorMessage {
  type: "error";
  code: string;
  message: string;
}

export type ServerMessage =
  | WelcomeMessage
  | ResponseMessage
  | SilenceWatchMessage
  | DiagnosisMessage
  | ErrorMessage;

// -- number canonicalization ---------------------------------------------

const SCALE = 10n ** BigInt(WIRE_DECIMALS);
const FRACTION_MASK = (1n << 52n) - 1n;
const IMPLICIT_BIT = 1n << 52n;

/** Round to 4 decimals, half to even, on the exact binary value. */
function roundWire(x: number): number {
  if (Number.isInteger(x)) return x;
  const view = new DataView(new ArrayBuffer(8));
  view.setFloat64(0, Math.abs(x));
  const bits = view.getBigUint64(0);
  const rawExp = Number((bits >> 52n) & 0x7ffn);
  const fraction = bits & FRACTION_MASK;
  // |x| = m * 2^e with integer m; e < 0 because x is not integral
  const m = rawExp === 0 ? fraction : fraction | IMPLICIT_BIT;
  const e = rawExp === 0 ? -1074 : rawExp - 1075;
  const den = 1n << BigInt(-e);
  const num = m * SCALE;
  const q = num / den;
  const rem = (num % den) * 2n;
  const n = rem > den || (rem === den && (q & 1n) === 1n) ? q + 1n : q;
  // exact decimal string of n / 10^4; parsing rounds to the nearest double
  const digits = n.toString().padStart(WIRE_DECIMALS + 1, "0");
  const head = digits.slice(0, -WIRE_DECIMALS);
  const tail = digits.slice(-WIRE_DECIMALS);
  return Number(`${x < 0 ? "-" : ""}${head}.${tail}`);
}

/**
 * Normalize a number to its wire form. Integral results stay plain
 * integers; everything else is a 4-decimal float whose shortest decimal
 * form is identical across mainstream JSON writers.
 */
export function canonicalNumber(x: number): number {
  if (typeof x !== "number" || !Number.isFinite(x)) {
    throw new ProtocolError(`cannot encode ${String(x)} on the wire`);
  }
  const rounded = roundWire(x);
  if (Number.isInteger(rounded)) {
    if (Math.abs(rounded) >= 1e15) {
      // the service emits these as arbitrary-precision integers; a
      // double cannot hold them faithfully, so refuse instead of drifting
      throw new ProtocolError("number outside the canonical wire range");
    }
    return rounded === 0 ? 0 : rounded;
  }
  return rounded;
}

// -- canonical serialization ---------------------------------------------

export function canonicalize(value: unknown): unknown {
  if (value === null) return null;
  switch (typeof value) {
    case "boolean":
    case "string":
      return value;
    case "number":
      return canonicalNumber(value);
    case "object": {
      if (Array.isArray(value)) return value.map(canonicalize);
      const proto = Object.getPrototypeOf(value);
      if (proto === Object.prototype || proto === null) {
        const out: Record<string, unknown> = {};
        for (const key of Object.keys(value)) {
          out[key] = canonicalize((value as Record<string, unknown>)[key]);
        }
        return out;
      }
      throw new ProtocolError(
        `cannot encode ${value.constructor?.name ?? "object"} on the wire`,
      );
    }
    default:
      throw new ProtocolError(`cannot encode ${typeof value} on the wire`);
  }
}

function codePointCompare(a: string, b: string): number {
  const pa = [...a];
  const pb = [...b];
  const n = Math.min(pa.length, pb.length);
  for (let i = 0; i < n; i++) {
    const d = (pa[i] as string).codePointAt(0)! - (pb[i] as string).codePointAt(0)!;
    if (d !== 0) return d;
  }
  return pa.length - pb.length;
}

function hasLoneSurrogate(s: string): boolean {
  for (let i = 0; i < s.length; i++) {
    const c = s.charCodeAt(i);
    if (c >= 0xd800 && c <= 0xdbff) {
      const d = s.charCodeAt(i + 1);
      if (!(d >= 0xdc00 && d <= 0xdfff)) return true;
      i++;
    } else if (c >= 0xdc00 && c <= 0xdfff) {
      return true;
    }
  }
  return false;
}

function quoteString(s: string): string {
  // the service encoder cannot emit these, so neither may we
  if (hasLoneSurrogate(s)) {
    throw new ProtocolError("lone surrogate in string");
  }
  // JSON.stringify's escape set matches the service encoder byte for byte
  return JSON.stringify(s);
}

function serialize(value: unknown): string {
  if (value === null) return "null";
  switch (typeof value) {
    case "boolean":
      return value ? "true" : "false";
    case "number":
      return String(value);
    case "string":
      return quoteString(value);
    default: {
      if (Array.isArray(value)) {
        return `[${value.map(serialize).join(",")}]`;
      }
      const obj = value as Record<string, unknown>;
      const parts = Object.keys(obj)
        .sort(codePointCompare)
        .map((key) => `${quoteString(key)}:${serialize(obj[key])}`);
      return `{${parts.join(",")}}`;
    }
  }
}

/** Canonical JSON text without the trailing newline (one WebSocket frame). */
export function encodeMessage(msg: ClientMessage | ServerMessage | object): string {
  return serialize(canonicalize(msg));
}

/** Canonical newline-terminated line (the stream and fixture form). */
export function encodeLine(msg: ClientMessage | ServerMessage | object): string {
  return encodeMessage(msg) + "\n";
}

// -- decoding and schema checks ------------------------------------------

function parseObject(text: string): Record<string, unknown> {
  let parsed: unknown;
  try {
    parsed = JSON.parse(text);
  } catch (exc) {
    throw new ProtocolError(`unparseable message: ${String(exc)}`);
  }
  if (
    typeof parsed !== "object" ||
    parsed === null ||
    Array.isArray(parsed) ||
    typeof (parsed as Record<string, unknown>)["type"] !== "string"
  ) {
    throw new ProtocolError("message must be an object with a string 'type'");
  }
  return parsed as Record<string, unknown>;
}

function requireString(msg: Record<string, unknown>, key: string): string {
  const v = msg[key];
  if (typeof v !== "string") {
    throw new ProtocolError(`${String(msg["type"])}: field '${key}' has wrong type`);
  }
  return v;
}

function requireNumber(msg: Record<string, unknown>, key: string): number {
  const v = msg[key];
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new ProtocolError(`${String(msg["type"])}: field '${key}' has wrong type`);
  }
  return v;
}

function requireInt(msg: Record<string, unknown>, key: string): number {
  const v = requireNumber(msg, key);
  if (!Number.isInteger(v)) {
    throw new ProtocolError(`${String(msg["type"])}: field '${key}' has wrong type`);
  }
  return v;
}

export function decodeServerMessage(data: string): ServerMessage {
  const msg = parseObject(data);
  const kind = msg["type"] as string;
  switch (kind) {
    case "welcome":
      requireString(msg, "session_id");
      break;
    case "response": {
      const rt = requireString(msg, "response_type");
      if (!(RESPONSE_TYPE_NAMES as readonly string[]).includes(rt)) {
        throw new ProtocolError("response: unknown response_type");
      }
      requireString(msg, "text");
      break;
    }
    case "silence_watch":
      requireNumber(msg, "deadline_s");
      if (requireInt(msg, "stage") < 0) {
        throw new ProtocolError("silence_watch: bad stage");
      }
      break;
    case "diagnosis": {
      if (requireInt(msg, "block_index") < 0) {
        throw new ProtocolError("diagnosis: negative block_index");
      }
      if (!(DEGREE_NAMES as readonly string[]).includes(requireString(msg, "final"))) {
        throw new ProtocolError("diagnosis: unknown final degree");
      }
      const per = msg["per_classifier"];
      if (typeof per !== "object" || per === null || Array.isArray(per)) {
        throw new ProtocolError("diagnosis: field 'per_classifier' has wrong type");
      }
      for (const [name, probs] of Object.entries(per)) {
        if (
          !Array.isArray(probs) ||
          probs.length !== 4 ||
          !probs.every((p) => typeof p === "number" && Number.isFinite(p))
        ) {
          throw new ProtocolError(`diagnosis: bad distribution for '${name}'`);
        }
      }
      const votes = msg["votes"];
      if (
        !Array.isArray(votes) ||
        votes.length !== 4 ||
        !votes.every((v) => (DEGREE_NAMES as readonly string[]).includes(v as string))
      ) {
        throw new ProtocolError("diagnosis: bad votes");
      }
      if (typeof msg["tie_broken"] !== "boolean") {
        throw new ProtocolError("diagnosis: field 'tie_broken' has wrong type");
      }
      break;
    }
    case "error":
      requireString(msg, "code");
      requireString(msg, "message");
      break;
    default:
      throw new ProtocolError(`unknown server message type '${kind}'`);
  }
  return msg as unknown as ServerMessage;
}

export function decodeClientMessage(data: string): ClientMessage {
  const msg = parseObject(data);
  const kind = msg["type"] as string;
  switch (kind) {
    case "hello":
      requireString(msg, "client");
      break;
    case "utterance": {
      if (!requireString(msg, "text").trim()) {
        throw new ProtocolError("utterance: empty text");
      }
      for (const key of ["t_start", "t_end"] as const) {
        if (key in msg) requireNumber(msg, key);
      }
      if ("audio_b64" in msg) requireString(msg, "audio_b64");
      break;
    }
    case "bye":
      break;
    default:
      throw new ProtocolError(`unknown client message type '${kind}'`);
  }
  return msg as unknown as ClientMessage;
}

/** Decode a newline-delimited server log, skipping blank lines. */
export function decodeServerLog(text: string): ServerMessage[] {
  return text
    .split("\n")
    .filter((line) => line.trim().length > 0)
    .map(decodeServerMessage);
}

// -- message builders ----------------------------------------------------

export function hello(client: string): ClientMessage {
  return { type: "hello", client };
}

export function utterance(
  text: string,
  tStart?: number,
  tEnd?: number,
  audioB64?: string,
): ClientMessage {
  const msg: ClientMessage = { type: "utterance", text };
  if (tStart !== undefined) msg.t_start = tStart;
  if (tEnd !== undefined) msg.t_end = tEnd;
  if (audioB64 !== undefined) msg.audio_b64 = audioB64;
  return msg;
}

export function bye(): ClientMessage {
  return { type: "bye" };
}
