/**
 * Wire types and frame parsing for "coplan-proto/1".
 *
 * The session service broadcasts one JSON object per WebSocket text
 * message.  This module knows the frame envelope and the payload
 * shapes, nothing about rendering: parsing is tolerant of unknown
 * fields (reported as warnings, never fatal) and strict about the
 * fields the console actually relies on.
 */

export const PROTOCOL = "coplan-proto/1";

export type AgentKind = "human" | "robot" | "joint";
export type Binding = "suggested" | "imposed" | "coordinated";
export type Phase = "running" | "intervention" | "done" | "failed";
export type RunStatus = "in-progress" | "solved" | "failed";
export type FailureReason =
  | "timeout"
  | "human-action-failure"
  | "robot-action-failure"
  | "dead-end"
  | "no-viable-path"
  | "no-pending-work";
export type ErrorCode =
  | "protocol"
  | "invalid-transition"
  | "stale-seq"
  | "session-closed"
  | "timeout";

/** An open suggestion: what the planner wants done next and by whom. */
export interface SuggestionPayload {
  suggestion: number;
  arc: string;
  action: string;
  agent: AgentKind;
  binding: Binding;
  issued_at: number;
}

/** The robot's in-flight action, present while the pending agent is the robot. */
export interface RobotActivity {
  suggestion: number;
  action: string;
  arc: string;
  started_at: number;
  duration: number;
}

/** A feasible action the operator could take instead of the suggestion. */
export interface Alternative {
  arc: string;
  action: string;
  agent: AgentKind;
}

/** One pallet position: which arc filled it and whether by handover. */
export interface PalletSlot {
  node: string;
  arc: string | null;
  kind: "plain" | "handover" | null;
}

export interface ProgressPayload {
  placed: number;
  total: number;
  slots: PalletSlot[];
}

export interface MetricsPayload {
  t_m: number;
  t_h: number;
  t_r: number;
  t_c: number;
}

export interface PathPayload {
  arcs: string[];
  cost: number;
}

export interface StatePayload {
  protocol: string;
  t: number;
  phase: Phase;
  status: RunStatus;
  failure_reason: FailureReason | null;
  pending: SuggestionPayload | null;
  robot_executing: RobotActivity | null;
  alternatives: Alternative[];
  progress: ProgressPayload;
  path: PathPayload | null;
  metrics: MetricsPayload;
  solved_nodes: string[];
  done_arcs: string[];
  suppressed_arcs: string[];
  interventions: number;
}

export interface ErrorPayload {
  code: ErrorCode;
  message: string;
}

export type Frame =
  | { kind: "state"; session: string; seq: number; payload: StatePayload }
  | { kind: "suggestion"; session: string; seq: number; payload: SuggestionPayload }
  | { kind: "metrics"; session: string; seq: number; payload: MetricsPayload }
  | { kind: "error"; session: string; seq: number; payload: ErrorPayload };

/** GET /session/{id} response document. */
export interface SnapshotDoc {
  protocol: string;
  session: string;
  seq: number;
  journal_len: number;
  state: StatePayload;
  metrics: MetricsPayload;
}

export type ClientEventKind = "action_done" | "intervene" | "handover_confirm";

export interface ClientEvent {
  kind: ClientEventKind;
  payload: Record<string, unknown>;
}

export function encodeClientEvent(event: ClientEvent): string {
  return JSON.stringify({ kind: event.kind, payload: event.payload });
}

export type ParseResult =
  | { ok: true; frame: Frame; warnings: string[] }
  | { ok: false; problem: "mismatch"; reason: string }
  | { ok: false; problem: "unknown-kind"; rawKind: string };

const FRAME_KINDS = new Set(["state", "suggestion", "metrics", "error"]);
const ENVELOPE_KEYS = new Set(["kind", "session", "seq", "payload"]);

const STATE_KEYS: Record<string, string> = {
  protocol: "string",
  t: "number",
  phase: "string",
  status: "string",
  failure_reason: "string?",
  pending: "object?",
  robot_executing: "object?",
  alternatives: "array",
  progress: "object",
  path: "object?",
  metrics: "object",
  solved_nodes: "array",
  done_arcs: "array",
  suppressed_arcs: "array",
  interventions: "number",
};

const SUGGESTION_KEYS: Record<string, string> = {
  suggestion: "number",
  arc: "string",
  action: "string",
  agent: "string",
  binding: "string",
  issued_at: "number",
};

const METRICS_KEYS: Record<string, string> = {
  t_m: "number",
  t_h: "number",
  t_r: "number",
  t_c: "number",
};

const ERROR_KEYS: Record<string, string> = {
  code: "string",
  message: "string",
};

function isRecord(value: unknown): value is Record<string, unknown> {
  return typeof value === "object" && value !== null && !Array.isArray(value);
}

/**
 * Check `payload` against a field table.  `"type?"` marks a nullable
 * field; `"array"` requires an Array.  Missing or mistyped required
 * fields fail; extra fields only produce warnings.
 */
function checkFields(
  payload: Record<string, unknown>,
  table: Record<string, string>,
  where: string,
  warnings: string[],
): string | null {
  for (const [key, spec] of Object.entries(table)) {
    const nullable = spec.endsWith("?");
    const want = nullable ? spec.slice(0, -1) : spec;
    if (!(key in payload)) {
      return `${where} is missing field "${key}"`;
    }
    const value = payload[key];
    if (value === null) {
      if (nullable) continue;
      return `${where}.${key} must not be null`;
    }
    if (want === "array") {
      if (!Array.isArray(value)) return `${where}.${key} must be an array`;
    } else if (want === "object") {
      if (!isRecord(value)) return `${where}.${key} must be an object`;
    } else if (typeof value !== want) {
      return `${where}.${key} must be a ${want}`;
    }
  }
  for (const key of Object.keys(payload)) {
    if (!(key in table)) {
      warnings.push(`ignoring unknown field ${where}.${key}`);
    }
  }
  return null;
}

/**
 * Parse one wire frame.  Returns the typed frame plus warnings for
 * unknown fields, a "mismatch" problem for anything malformed (the
 * caller shows a non-fatal banner), or "unknown-kind" for frame kinds
 * this console does not know (the caller warns and ignores).
 */
export function parseFrame(raw: string): ParseResult {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    return { ok: false, problem: "mismatch", reason: "frame is not JSON" };
  }
  if (!isRecord(doc)) {
    return { ok: false, problem: "mismatch", reason: "frame is not an object" };
  }
  const { kind, session, seq, payload } = doc;
  if (typeof kind !== "string") {
    return { ok: false, problem: "mismatch", reason: "frame has no kind" };
  }
  if (!FRAME_KINDS.has(kind)) {
    return { ok: false, problem: "unknown-kind", rawKind: kind };
  }
  if (typeof session !== "string" || typeof seq !== "number" || !isRecord(payload)) {
    return {
      ok: false,
      problem: "mismatch",
      reason: `${kind} frame envelope is malformed`,
    };
  }
  const warnings: string[] = [];
  for (const key of Object.keys(doc)) {
    if (!ENVELOPE_KEYS.has(key)) {
      warnings.push(`ignoring unknown envelope field ${key}`);
    }
  }

  let failure: string | null = null;
  if (kind === "state") {
    failure = checkFields(payload, STATE_KEYS, "state", warnings);
    if (failure === null && payload.pending !== null) {
      failure = checkFields(
        payload.pending as Record<string, unknown>,
        SUGGESTION_KEYS,
        "state.pending",
        warnings,
      );
    }
  } else if (kind === "suggestion") {
    failure = checkFields(payload, SUGGESTION_KEYS, "suggestion", warnings);
  } else if (kind === "metrics") {
    failure = checkFields(payload, METRICS_KEYS, "metrics", warnings);
  } else {
    failure = checkFields(payload, ERROR_KEYS, "error", warnings);
  }
  if (failure !== null) {
    return { ok: false, problem: "mismatch", reason: failure };
  }
  const frame = { kind, session, seq, payload } as unknown as Frame;
  return { ok: true, frame, warnings };
}

/** Parse a GET /session/{id} snapshot document. */
export function parseSnapshot(raw: string): SnapshotDoc {
  const doc = JSON.parse(raw);
  if (!isRecord(doc) || !isRecord(doc.state) || typeof doc.seq !== "number") {
    throw new Error("snapshot document is malformed");
  }
  return doc as unknown as SnapshotDoc;
}
