/**
 * WebSocket connection with reconnect backoff and inbound ordering.
 *
 * Outbound messages get strictly increasing sequence numbers; inbound
 * messages that arrive with a stale sequence number are discarded and
 * counted, never delivered to the session layer.
 */

import { decodeMessage, encodeMessage, MessageType, WireMessage } from "./protocol.js";

export type ConnectionState = "connecting" | "open" | "reconnecting" | "closed";

/** The subset of the WebSocket API the client uses; tests inject fakes. */
export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
}

export interface ConnectionOptions {
  socketFactory?: (url: string) => SocketLike;
  backoffBaseMs?: number;
  backoffMaxMs?: number;
  /** injected for deterministic tests */
  random?: () => number;
  setTimer?: (fn: () => void, ms: number) => unknown;
}

export class RobotConnection {
  readonly url: string;
  state: ConnectionState = "closed";
  staleDropped = 0;
  reconnectAttempts = 0;
  private outSeq = 0;
  private lastInSeq = -1;
  private socket: SocketLike | null = null;
  private closedByUser = false;
  private readonly factory: (url: string) => SocketLike;
  private readonly backoffBase: number;
  private readonly backoffMax: number;
  private readonly random: () => number;
  private readonly setTimer: (fn: () => void, ms: number) => unknown;
  private messageListeners: Array<(m: WireMessage) => void> = [];
  private stateListeners: Array<(s: ConnectionState) => void> = [];

  constructor(url: string, options: ConnectionOptions = {}) {
    this.url = url;
    this.factory =
      options.socketFactory ??
      ((u: string) => new WebSocket(u) as unknown as SocketLike);
    this.backoffBase = options.backoffBaseMs ?? 500;
    this.backoffMax = options.backoffMaxMs ?? 15000;
    this.random = options.random ?? Math.random;
    this.setTimer = options.setTimer ?? ((fn, ms) => setTimeout(fn, ms));
  }

  onMessage(listener: (m: WireMessage) => void): void {
    this.messageListeners.push(listener);
  }

  onState(listener: (s: ConnectionState) => void): void {
    this.stateListeners.push(listener);
  }

  private setState(s: ConnectionState): void {
    this.state = s;
    for (const l of this.stateListeners) l(s);
  }

  connect(): void {
    this.closedByUser = false;
    this.open("connecting");
  }

  private open(entering: ConnectionState): void {
    this.setState(entering);
    let socket: SocketLike;
    try {
      socket = this.factory(this.url);
    } catch {
      this.scheduleReconnect();
      return;
    }
    this.socket = socket;
    socket.onopen = () => {
      this.reconnectAttempts = 0;
      this.lastInSeq = -1; // new server connection, new sequence space
      this.setState("open");
    };
    socket.onmessage = (ev) => {
      let msg: WireMessage;
      try {
        msg = decodeMessage(String(ev.data));
      } catch {
        return; // undecodable frames are dropped silently
      }
      if (msg.seq <= this.lastInSeq) {
        this.staleDropped += 1;
        return;
      }
      this.lastInSeq = msg.seq;
      for (const l of this.messageListeners) l(msg);
    };
    socket.onclose = () => {
      this.socket = null;
      if (!this.closedByUser) this.scheduleReconnect();
      else this.setState("closed");
    };
    socket.onerror = () => {
      /* onclose follows */
    };
  }

  private scheduleReconnect(): void {
    this.setState("reconnecting");
    const delay = this.nextBackoffMs();
    this.reconnectAttempts += 1;
    this.setTimer(() => {
      if (!this.closedByUser) this.open("reconnecting");
    }, delay);
  }

  nextBackoffMs(): number {
    const raw = Math.min(
      this.backoffBase * Math.pow(2, this.reconnectAttempts),
      this.backoffMax,
    );
    // +-25% jitter so a crowd of clients does not stampede the server
    return Math.max(0, Math.round(raw * (1 + 0.25 * (this.random() * 2 - 1))));
  }

  /** Send one message; returns the message actually written. */
  send(type: MessageType, payload: Record<string, unknown> = {}): WireMessage {
    if (!this.socket || this.state !== "open") {
      throw new Error(`cannot send while connection is ${this.state}`);
    }
    this.outSeq += 1;
    const msg: WireMessage = {
      type,
      payload,
      seq: this.outSeq,
      ts: Date.now() / 1000,
    };
    this.socket.send(encodeMessage(msg));
    return msg;
  }

  close(): void {
    this.closedByUser = true;
    if (this.socket) this.socket.close();
    else this.setState("closed");
  }
}
