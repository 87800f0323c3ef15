/**
 * Session view-model: applies the inbound message stream to a plain state
 * object and exposes the five user actions, each of which maps to exactly
 * one outbound message. Nothing here touches the DOM or the renderer.
 */

import { ConnectionState, RobotConnection } from "./connection.js";
import {
  FramePayload,
  HelloPayload,
  PlaybackState,
  RobotFramePayload,
  WireMessage,
} from "./protocol.js";

export interface SessionView {
  connection: ConnectionState;
  sessionId: string | null;
  command: string | null;
  vocab: string[];
  contactTau: number;
  fps: number;
  humanParents: number[];
  robotParents: number[];
  robotEndEffectors: number[];
  lastHuman: FramePayload | null;
  lastRobot: RobotFramePayload | null;
  playback: PlaybackState | null;
  sessionState: string;
  drops: number;
  staleDropped: number;
  pendingRating: number | null;
  note: string;
  feedbackAcks: string[];
  errors: string[];
  rejectedRobotFrames: number;
}

function emptyView(): SessionView {
  return {
    connection: "closed",
    sessionId: null,
    command: null,
    vocab: [],
    contactTau: 0.05,
    fps: 10,
    humanParents: [],
    robotParents: [],
    robotEndEffectors: [],
    lastHuman: null,
    lastRobot: null,
    playback: null,
    sessionState: "unknown",
    drops: 0,
    staleDropped: 0,
    pendingRating: null,
    note: "",
    feedbackAcks: [],
    errors: [],
    rejectedRobotFrames: 0,
  };
}

export class SessionClient {
  readonly view: SessionView = emptyView();
  private listeners: Array<(v: SessionView) => void> = [];

  constructor(private readonly connection: RobotConnection) {
    connection.onState((s) => {
      this.view.connection = s;
      if (s === "open") {
        connection.send("hello", {});
      }
      this.notify();
    });
    connection.onMessage((m) => this.apply(m));
  }

  subscribe(listener: (v: SessionView) => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    this.view.staleDropped = this.connection.staleDropped;
    for (const l of this.listeners) l(this.view);
  }

  private apply(m: WireMessage): void {
    switch (m.type) {
      case "hello": {
        const p = m.payload as unknown as HelloPayload;
        this.view.sessionId = p.session_id;
        this.view.command = p.command;
        this.view.vocab = p.vocab ?? [];
        this.view.contactTau = p.contact_tau ?? 0.05;
        this.view.fps = p.fps ?? 10;
        this.view.humanParents = p.human_parents ?? [];
        this.view.robotParents = p.robot_parents ?? [];
        this.view.robotEndEffectors = p.robot_end_effectors ?? [];
        break;
      }
      case "human_frame":
        this.view.lastHuman = m.payload as unknown as FramePayload;
        break;
      case "robot_frame": {
        const p = m.payload as unknown as RobotFramePayload;
        // render only executed frames that belong to this session
        if (p.frame_type !== "executed") {
          this.view.rejectedRobotFrames += 1;
          return;
        }
        if (this.view.sessionId && p.session_id && p.session_id !== this.view.sessionId) {
          this.view.rejectedRobotFrames += 1;
          return;
        }
        this.view.lastRobot = p;
        break;
      }
      case "session_meta": {
        const p = m.payload as Record<string, unknown>;
        if (p.ack === "feedback") {
          this.view.feedbackAcks.push(String(p.record_id));
          break;
        }
        if (typeof p.state === "string") this.view.sessionState = p.state;
        if (typeof p.command === "string") this.view.command = p.command;
        if (typeof p.drops === "number") this.view.drops = p.drops;
        if (p.playback) this.view.playback = p.playback as unknown as PlaybackState;
        break;
      }
      case "error":
        this.view.errors.push(String((m.payload as { message?: unknown }).message));
        break;
      default:
        break;
    }
    this.notify();
  }

  // -- the five user actions; one outbound message each --------------------

  setCommand(label: string): WireMessage {
    const msg = this.connection.send("set_command", { command: label });
    return msg;
  }

  play(): WireMessage {
    return this.connection.send("session_meta", { request: "play" });
  }

  pause(): WireMessage {
    return this.connection.send("session_meta", { request: "pause" });
  }

  scrub(t: number): WireMessage {
    return this.connection.send("session_meta", { request: "scrub", t });
  }

  selectRecording(id: string): WireMessage {
    return this.connection.send("session_meta", {
      request: "select_recording",
      recording: id,
    });
  }

  setPendingRating(rating: number | null): void {
    this.view.pendingRating = rating;
    this.notify();
  }

  submitFeedback(rating: number, note?: string): WireMessage {
    if (!Number.isInteger(rating) || rating < 1 || rating > 5) {
      throw new Error(`rating must be an integer 1..5, got ${rating}`);
    }
    const payload: Record<string, unknown> = { rating };
    if (note) payload.note = note;
    const msg = this.connection.send("feedback", payload);
    this.view.pendingRating = null;
    this.notify();
    return msg;
  }

  requestMeta(): WireMessage {
    return this.connection.send("session_meta", {});
  }
}
