import { StatePayload, SuggestionPayload } from "../src/protocol.js";

/** A minimal valid state payload; override what the test cares about. */
export function statePayload(over: Partial<StatePayload> = {}): StatePayload {
  return {
    protocol: "coplan-proto/1",
    t: 100.0,
    phase: "running",
    status: "in-progress",
    failure_reason: null,
    pending: null,
    robot_executing: null,
    alternatives: [],
    progress: {
      placed: 0,
      total: 1,
      slots: [{ node: "pallet_1", arc: null, kind: null }],
    },
    path: { arcs: ["h_1"], cost: 1.0 },
    metrics: { t_m: 0.0, t_h: 0.0, t_r: 0.0, t_c: 0.0 },
    solved_nodes: ["part_1"],
    done_arcs: [],
    suppressed_arcs: [],
    interventions: 0,
    ...over,
  };
}

export function pending(over: Partial<SuggestionPayload> = {}): SuggestionPayload {
  return {
    suggestion: 7,
    arc: "h_1",
    action: "inspect",
    agent: "human",
    binding: "suggested",
    issued_at: 100.0,
    ...over,
  };
}

export function frameText(
  kind: string,
  seq: number,
  payload: unknown,
  session = "s-test",
): string {
  return JSON.stringify({ kind, session, seq, payload });
}
