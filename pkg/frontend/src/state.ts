/**
 * ViewState: the console's entire picture of a session.
 *
 * The state is a pure projection of the latest `state` broadcast plus
 * the local connection status; there is no client-side planning.  The
 * transient fields (`awaitingServer`, `lastError`, `banner`) exist
 * only between a local send and the next broadcast, so after
 * quiescence the projection of the stream, of a reconnect hello, and
 * of a snapshot are all identical: the reconnect guarantee the tests
 * hold the console to.
 */

import {
  Alternative,
  AgentKind,
  Binding,
  ClientEventKind,
  ErrorPayload,
  FailureReason,
  Frame,
  MetricsPayload,
  parseFrame,
  Phase,
  PROTOCOL,
  RunStatus,
  SnapshotDoc,
  StatePayload,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "open" | "reconnecting" | "closed";

export interface SuggestionView {
  seq: number;
  action: string;
  agent: AgentKind;
  binding: Binding;
  arc: string;
  issuedAt: number;
}

export interface RobotView {
  active: boolean;
  action: string | null;
  arc: string | null;
  startedAt: number | null;
  duration: number | null;
}

export interface PalletView {
  placed: number;
  total: number;
  slots: { node: string; arc: string | null; kind: "plain" | "handover" | null }[];
}

export interface ViewState {
  connection: ConnectionStatus;
  session: string | null;
  seq: number;
  phase: Phase | null;
  status: RunStatus | null;
  failureReason: FailureReason | null;
  suggestion: SuggestionView | null;
  alternatives: Alternative[];
  robot: RobotView;
  pallet: PalletView;
  pathArcs: string[];
  pathCost: number | null;
  metrics: MetricsPayload | null;
  interventions: number;
  feed: string[];
  awaitingServer: boolean;
  lastError: ErrorPayload | null;
  banner: string | null;
}

/** One operator control the UI may offer; only `enabled` ones may send. */
export interface ControlSpec {
  kind: ClientEventKind;
  label: string;
  enabled: boolean;
  /** For action_done: the action this control reports finished. */
  action: string | null;
  /** For action_done deviations: the arc to disambiguate with. */
  arc: string | null;
  /** The suggestion seq the event answers, when one is pending. */
  suggestion: number | null;
  /** Agent of the action behind the control (null for intervene). */
  agent: AgentKind | null;
}

const IDLE_ROBOT: RobotView = {
  active: false,
  action: null,
  arc: null,
  startedAt: null,
  duration: null,
};

export function initialView(connection: ConnectionStatus = "connecting"): ViewState {
  return {
    connection,
    session: null,
    seq: -1,
    phase: null,
    status: null,
    failureReason: null,
    suggestion: null,
    alternatives: [],
    robot: IDLE_ROBOT,
    pallet: { placed: 0, total: 0, slots: [] },
    pathArcs: [],
    pathCost: null,
    metrics: null,
    interventions: 0,
    feed: [],
    awaitingServer: false,
    lastError: null,
    banner: null,
  };
}

/** The event feed is itself derived from the latest state payload. */
function deriveFeed(s: StatePayload): string[] {
  const feed: string[] = [];
  for (const slot of s.progress.slots) {
    if (slot.kind !== null && slot.arc !== null) {
      feed.push(`${slot.node} placed via ${slot.arc} (${slot.kind})`);
    }
  }
  if (s.interventions > 0) {
    feed.push(`interventions so far: ${s.interventions}`);
  }
  if (s.robot_executing !== null) {
    feed.push(
      `robot executing ${s.robot_executing.action} on ${s.robot_executing.arc}`,
    );
  } else if (s.pending !== null && s.pending.agent === "human") {
    feed.push(`your action: ${s.pending.action} (${s.pending.arc})`);
  } else if (s.pending !== null && s.pending.agent === "joint") {
    feed.push(`joint ${s.pending.action} on ${s.pending.arc}: confirm when done`);
  }
  if (s.status === "solved") {
    feed.push("cooperation solved");
  } else if (s.status === "failed") {
    feed.push(`cooperation failed: ${s.failure_reason ?? "unknown"}`);
  }
  return feed;
}

/** Project a full state payload into a ViewState. */
function projectState(
  view: ViewState,
  session: string,
  seq: number,
  s: StatePayload,
): ViewState {
  const pending = s.pending;
  return {
    connection: view.connection,
    session,
    seq,
    phase: s.phase,
    status: s.status,
    failureReason: s.failure_reason,
    suggestion:
      pending === null
        ? null
        : {
            seq: pending.suggestion,
            action: pending.action,
            agent: pending.agent,
            binding: pending.binding,
            arc: pending.arc,
            issuedAt: pending.issued_at,
          },
    alternatives: s.alternatives.map((a) => ({ ...a })),
    robot:
      s.robot_executing === null
        ? IDLE_ROBOT
        : {
            active: true,
            action: s.robot_executing.action,
            arc: s.robot_executing.arc,
            startedAt: s.robot_executing.started_at,
            duration: s.robot_executing.duration,
          },
    pallet: {
      placed: s.progress.placed,
      total: s.progress.total,
      slots: s.progress.slots.map((slot) => ({ ...slot })),
    },
    pathArcs: s.path === null ? [] : [...s.path.arcs],
    pathCost: s.path === null ? null : s.path.cost,
    metrics: { ...s.metrics },
    interventions: s.interventions,
    feed: deriveFeed(s),
    awaitingServer: false,
    lastError: null,
    banner: s.protocol === PROTOCOL ? null : `unexpected protocol ${s.protocol}`,
  };
}

export interface ApplyResult {
  view: ViewState;
  /** True when the frame changed the view; stale/unknown frames do not. */
  applied: boolean;
  /** Unknown-field and stale-frame notes for the console log. */
  warnings: string[];
}

/**
 * Fold one raw wire message into the view.
 *
 * Broadcast frames arrive in seq order; anything older than what the
 * view already reflects is discarded as stale.  A `state` frame with
 * the current seq is the connect-time hello restating the state and
 * is applied (idempotently).  Error frames are addressed to this
 * client alone (seq 0), bypass the ordering, and re-enable controls
 * so the operator sees the server's reason and can retry.
 */
export function applyFrame(view: ViewState, raw: string): ApplyResult {
  const parsed = parseFrame(raw);
  if (!parsed.ok) {
    if (parsed.problem === "unknown-kind") {
      return {
        view,
        applied: false,
        warnings: [`ignoring unknown frame kind "${parsed.rawKind}"`],
      };
    }
    return {
      view: { ...view, banner: `schema mismatch: ${parsed.reason}` },
      applied: false,
      warnings: [],
    };
  }
  const { frame, warnings } = parsed;

  if (frame.kind === "error") {
    return {
      view: { ...view, lastError: frame.payload, awaitingServer: false },
      applied: true,
      warnings,
    };
  }

  const staleLimit = frame.kind === "state" ? view.seq - 1 : view.seq;
  if (frame.seq <= staleLimit) {
    warnings.push(`discarding stale ${frame.kind} frame seq ${frame.seq}`);
    return { view, applied: false, warnings };
  }

  if (frame.kind === "state") {
    return {
      view: projectState(view, frame.session, frame.seq, frame.payload),
      applied: true,
      warnings,
    };
  }
  if (frame.kind === "metrics") {
    return {
      view: { ...view, seq: frame.seq, metrics: { ...frame.payload } },
      applied: true,
      warnings,
    };
  }
  // A suggestion frame always precedes the state frame that carries the
  // same pending suggestion in full, so only the seq moves here.
  return { view: { ...view, seq: frame.seq }, applied: true, warnings };
}

/** Build the view a freshly connected console derives from a snapshot. */
export function viewFromSnapshot(
  doc: SnapshotDoc,
  connection: ConnectionStatus = "open",
): ViewState {
  return projectState(initialView(connection), doc.session, doc.seq, doc.state);
}

export function noteConnection(view: ViewState, status: ConnectionStatus): ViewState {
  return { ...view, connection: status };
}

/** Optimistically disable controls until the next broadcast lands. */
export function noteSent(view: ViewState): ViewState {
  return { ...view, awaitingServer: true, lastError: null };
}

/**
 * Derive the operator controls from the view.
 *
 * Exactly the actions the server marks `suggested` or `coordinated`
 * for the human side are actionable; `imposed` robot actions never
 * are: while the robot executes, the only live control is the stop.
 */
export function controls(view: ViewState): ControlSpec[] {
  const out: ControlSpec[] = [];
  const s = view.suggestion;
  const live =
    view.connection === "open" &&
    !view.awaitingServer &&
    (view.phase === "running" || view.phase === "intervention") &&
    s !== null;

  if (s !== null && s.agent === "human") {
    out.push({
      kind: "action_done",
      label: `done: ${s.action}`,
      enabled: live && s.binding === "suggested",
      action: s.action,
      arc: s.arc,
      suggestion: s.seq,
      agent: "human",
    });
    for (const alt of view.alternatives) {
      if (alt.agent !== "human") continue;
      if (alt.arc === s.arc && alt.action === s.action) continue;
      out.push({
        kind: "action_done",
        label: `instead: ${alt.action} via ${alt.arc}`,
        enabled: live && s.binding === "suggested",
        action: alt.action,
        arc: alt.arc,
        suggestion: s.seq,
        agent: "human",
      });
    }
  }
  out.push({
    kind: "handover_confirm",
    label: "confirm handover",
    enabled: live && s !== null && s.agent === "joint" && s.binding === "coordinated",
    action: s !== null && s.agent === "joint" ? s.action : null,
    arc: s !== null && s.agent === "joint" ? s.arc : null,
    suggestion: s !== null && s.agent === "joint" ? s.seq : null,
    agent: s !== null && s.agent === "joint" ? "joint" : null,
  });
  out.push({
    kind: "intervene",
    label: "stop robot",
    enabled: live && view.robot.active,
    action: null,
    arc: null,
    suggestion: null,
    agent: null,
  });
  return out;
}

/** The wire event a control sends when pressed. */
export function eventForControl(control: ControlSpec): {
  kind: ClientEventKind;
  payload: Record<string, unknown>;
} {
  if (control.kind === "action_done") {
    const payload: Record<string, unknown> = { suggestion: control.suggestion };
    if (control.action !== null) payload.action = control.action;
    if (control.arc !== null) payload.arc = control.arc;
    return { kind: "action_done", payload };
  }
  if (control.kind === "handover_confirm") {
    return { kind: "handover_confirm", payload: { suggestion: control.suggestion } };
  }
  return { kind: "intervene", payload: {} };
}
