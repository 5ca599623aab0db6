/**
 * SessionClient: one WebSocket to one session, with automatic
 * reconnect.  On every (re)connect the service sends a hello, a
 * `state` frame restating the current state at the latest seq, so
 * resuming is just applying frames; a seq jump in the hello tells us
 * how much we missed, and the full restatement covers it.
 */

import {
  ClientEventKind,
  encodeClientEvent,
  parseSnapshot,
  SnapshotDoc,
} from "./protocol.js";
import {
  applyFrame,
  controls,
  ControlSpec,
  eventForControl,
  initialView,
  noteConnection,
  noteSent,
  viewFromSnapshot,
  ViewState,
} from "./state.js";

/** The subset of the WebSocket interface the client needs; the browser
 * WebSocket and the node `ws` package both satisfy it. */
export interface SocketLike {
  send(data: string): void;
  close(code?: number, reason?: string): void;
  addEventListener(
    type: "open" | "message" | "close" | "error",
    listener: (event: any) => void,
  ): void;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientOptions {
  /** Service base URL, e.g. "http://127.0.0.1:8000". */
  server: string;
  session: string;
  socketFactory?: SocketFactory;
  fetchFn?: typeof fetch;
  /** Base reconnect delay; doubles per attempt up to 8x. */
  reconnectDelayMs?: number;
  onWarning?: (message: string) => void;
}

type Listener = (view: ViewState) => void;

function defaultSocketFactory(url: string): SocketLike {
  const ctor = (globalThis as Record<string, unknown>).WebSocket as
    | (new (url: string) => SocketLike)
    | undefined;
  if (ctor === undefined) {
    throw new Error("no WebSocket implementation available; pass socketFactory");
  }
  return new ctor(url);
}

export class SessionClient {
  view: ViewState;

  private readonly server: string;
  private readonly session: string;
  private readonly socketFactory: SocketFactory;
  private readonly fetchFn: typeof fetch;
  private readonly reconnectDelayMs: number;
  private readonly onWarning: (message: string) => void;
  private readonly listeners = new Set<Listener>();
  private socket: SocketLike | null = null;
  private attempts = 0;
  private closedByUs = false;
  private reconnectTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(options: ClientOptions) {
    this.server = options.server.replace(/\/$/, "");
    this.session = options.session;
    this.socketFactory = options.socketFactory ?? defaultSocketFactory;
    this.fetchFn = options.fetchFn ?? globalThis.fetch.bind(globalThis);
    this.reconnectDelayMs = options.reconnectDelayMs ?? 500;
    this.onWarning = options.onWarning ?? ((m) => console.warn(m));
    this.view = initialView("connecting");
  }

  get wsUrl(): string {
    return `${this.server.replace(/^http/, "ws")}/session/${this.session}/ws`;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.add(listener);
    return () => this.listeners.delete(listener);
  }

  connect(): void {
    this.closedByUs = false;
    this.openSocket();
  }

  close(): void {
    this.closedByUs = true;
    if (this.reconnectTimer !== null) {
      clearTimeout(this.reconnectTimer);
      this.reconnectTimer = null;
    }
    this.socket?.close(1000, "console closed");
    this.socket = null;
    this.setView(noteConnection(this.view, "closed"));
  }

  /** Operator controls for the current view. */
  controls(): ControlSpec[] {
    return controls(this.view);
  }

  /** Press a control: sends its event iff the *current* view still
   * enables a control with the same kind, action, and arc.  Pressing
   * a stale button (double-click, raced broadcast) is a no-op. */
  press(control: ControlSpec): boolean {
    const current = controls(this.view).find(
      (c) =>
        c.kind === control.kind &&
        c.action === control.action &&
        c.arc === control.arc,
    );
    if (current === undefined || !current.enabled || this.socket === null) {
      return false;
    }
    const event = eventForControl(current);
    return this.sendEvent(event.kind, event.payload);
  }

  /** Send a raw client event; controls are optimistically disabled
   * until the next broadcast (or error frame) lands. */
  sendEvent(kind: ClientEventKind, payload: Record<string, unknown>): boolean {
    if (this.socket === null || this.view.connection !== "open") return false;
    this.socket.send(encodeClientEvent({ kind, payload }));
    this.setView(noteSent(this.view));
    return true;
  }

  /** Fetch the canonical snapshot document text. */
  async snapshotText(source: "live" | "replay" = "live"): Promise<string> {
    const res = await this.fetchFn(
      `${this.server}/session/${this.session}?source=${source}`,
    );
    if (!res.ok) {
      throw new Error(`snapshot fetch failed: ${res.status}`);
    }
    return res.text();
  }

  /** The ViewState a fresh console would derive from the snapshot. */
  async snapshotView(source: "live" | "replay" = "live"): Promise<ViewState> {
    const doc: SnapshotDoc = parseSnapshot(await this.snapshotText(source));
    return viewFromSnapshot(doc, this.view.connection);
  }

  private setView(view: ViewState): void {
    this.view = view;
    for (const listener of this.listeners) listener(view);
  }

  private openSocket(): void {
    const socket = this.socketFactory(this.wsUrl);
    this.socket = socket;
    socket.addEventListener("open", () => {
      if (this.socket !== socket) return;
      this.attempts = 0;
      this.setView(noteConnection(this.view, "open"));
    });
    socket.addEventListener("message", (event: { data: unknown }) => {
      if (this.socket !== socket) return;
      const previousSeq = this.view.seq;
      const result = applyFrame(this.view, String(event.data));
      for (const warning of result.warnings) this.onWarning(warning);
      if (result.applied && previousSeq >= 0 && this.view.seq >= 0) {
        const jump = result.view.seq - previousSeq;
        if (jump > 1) {
          this.onWarning(
            `missed ${jump - 1} frame(s); resumed from restatement at seq ${result.view.seq}`,
          );
        }
      }
      if (result.applied || result.view.banner !== this.view.banner) {
        this.setView(result.view);
      }
    });
    socket.addEventListener("close", () => {
      if (this.socket !== socket) return;
      this.socket = null;
      if (this.closedByUs) return;
      this.setView(noteConnection(this.view, "reconnecting"));
      const delay =
        this.reconnectDelayMs * Math.min(8, 2 ** Math.min(this.attempts, 3));
      this.attempts += 1;
      this.reconnectTimer = setTimeout(() => {
        this.reconnectTimer = null;
        if (!this.closedByUs) this.openSocket();
      }, delay);
    });
    socket.addEventListener("error", () => {
      // close always follows; reconnect is handled there
    });
  }
}

export interface CreateSessionRequest {
  model: Record<string, unknown>;
  scale?: number;
  timeout?: number;
  seed?: number;
  robot?: Record<string, unknown>;
}

/** POST /session and return the new session id plus its first state. */
export async function createSession(
  server: string,
  request: CreateSessionRequest,
  fetchFn: typeof fetch = globalThis.fetch.bind(globalThis),
): Promise<{ session: string; state: Record<string, unknown> }> {
  const res = await fetchFn(`${server.replace(/\/$/, "")}/session`, {
    method: "POST",
    headers: { "content-type": "application/json" },
    body: JSON.stringify(request),
  });
  if (!res.ok) {
    throw new Error(`session create failed: ${res.status} ${await res.text()}`);
  }
  const doc = (await res.json()) as { session: string; state: Record<string, unknown> };
  return { session: doc.session, state: doc.state };
}
