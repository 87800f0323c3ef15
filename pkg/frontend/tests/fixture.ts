/**
 * Scripted fixture server speaking the wire schema over WebSocket: canned
 * hello metadata, robot-frame echo for every human frame, a tiny built-in
 * recording with play/pause/scrub, feedback persisted to a session file in
 * the service's JSON-lines format, and knobs for misbehaving on purpose
 * (stale sequence numbers).
 */

import { mkdirSync, appendFileSync } from "node:fs";
import { join } from "node:path";
import { AddressInfo } from "node:net";
import { WebSocketServer, WebSocket } from "ws";

import { WireMessage } from "../src/protocol.js";

const HUMAN_PARENTS = [-1, 0, 0, 1, 2];
const ROBOT_PARENTS = [-1, 0, 1, 1];
const ROBOT_EFFECTORS = [2, 3];
const FPS = 10;

function zeros(n: number): number[][] {
  return Array.from({ length: n }, (_, i) => [i * 0.1, 1.0, 0.0]);
}

export interface FixtureOptions {
  sessionsDir: string;
  /** send one deliberately stale message after this many robot frames */
  staleAfter?: number;
}

export class FixtureServer {
  readonly wss: WebSocketServer;
  readonly received: WireMessage[] = [];
  sessionId = "fixture-session";
  private outSeq = 0;
  private playing = false;
  private position = 0;
  private recording: string | null = null;
  private playTimer: ReturnType<typeof setInterval> | null = null;
  private robotFramesSent = 0;
  readonly frames = 40;
  private sessionFile: string;

  constructor(private readonly options: FixtureOptions) {
    mkdirSync(options.sessionsDir, { recursive: true });
    this.sessionFile = join(options.sessionsDir, `${this.sessionId}.jsonl`);
    this.wss = new WebSocketServer({ port: 0 });
    this.wss.on("connection", (socket) => this.handle(socket));
  }

  get port(): number {
    return (this.wss.address() as AddressInfo).port;
  }

  url(): string {
    return `ws://127.0.0.1:${this.port}/ws`;
  }

  private append(record: Record<string, unknown>): void {
    appendFileSync(this.sessionFile, JSON.stringify(record) + "\n");
  }

  private send(socket: WebSocket, type: string, payload: Record<string, unknown>, seq?: number): void {
    this.outSeq += 1;
    const msg = {
      type,
      payload,
      seq: seq ?? this.outSeq,
      ts: Date.now() / 1000,
    };
    socket.send(JSON.stringify(msg));
  }

  private sendRobotFrame(socket: WebSocket, timestamp: number, contact = false): void {
    this.robotFramesSent += 1;
    if (
      this.options.staleAfter !== undefined &&
      this.robotFramesSent === this.options.staleAfter
    ) {
      // scripted misbehaviour: replay an old sequence number
      this.send(socket, "robot_frame", this.robotPayload(timestamp, contact), 1);
    }
    this.send(socket, "robot_frame", this.robotPayload(timestamp, contact));
    this.append({
      kind: "robot_frame",
      timestamp,
      joints: zeros(ROBOT_PARENTS.length),
      root: { rotation: [1, 0, 0, 0], translation: [0, 0, 0], scale: 1 },
      angles: ROBOT_PARENTS.map(() => [0, 0, 0]),
    });
  }

  private robotPayload(timestamp: number, contact: boolean) {
    return {
      timestamp,
      joints: zeros(ROBOT_PARENTS.length),
      root: { rotation: [1, 0, 0, 0], translation: [0, 0, 0], scale: 1 },
      angles: ROBOT_PARENTS.map(() => [0, 0, 0]),
      frame_type: "executed",
      session_id: this.sessionId,
      contact_distance: contact ? [0.01, 0.2] : [0.5, 0.6],
    };
  }

  private meta(): Record<string, unknown> {
    return {
      session_id: this.sessionId,
      state: "active",
      drops: 0,
      command: "high-five",
      playback: this.recording
        ? {
            recording: this.recording,
            frames: this.frames,
            position: this.position,
            playing: this.playing,
          }
        : null,
    };
  }

  private startPlayback(socket: WebSocket): void {
    if (this.playTimer) clearInterval(this.playTimer);
    this.playing = true;
    this.playTimer = setInterval(() => {
      if (!this.playing || this.position >= this.frames) {
        if (this.playTimer) clearInterval(this.playTimer);
        this.playing = false;
        return;
      }
      const t = this.position / FPS;
      this.send(socket, "human_frame", {
        timestamp: t,
        joints: zeros(HUMAN_PARENTS.length),
        root: { rotation: [1, 0, 0, 0], translation: [0, 0, 0], scale: 1 },
      });
      this.sendRobotFrame(socket, t);
      this.position += 1;
    }, 1000 / FPS / 4); // 4x speed keeps the tests quick
  }

  private handle(socket: WebSocket): void {
    socket.on("message", (data) => {
      let msg: WireMessage;
      try {
        msg = JSON.parse(String(data));
      } catch {
        this.send(socket, "error", { message: "malformed JSON" });
        return;
      }
      this.received.push(msg);
      switch (msg.type) {
        case "hello":
          this.append({
            kind: "header",
            format: "hriloop-session-v1",
            session_id: this.sessionId,
            command: "high-five",
            fps: FPS,
            robot_type: "fixture-bot",
            started_at: Date.now() / 1000,
          });
          this.send(socket, "hello", {
            session_id: this.sessionId,
            command: "high-five",
            fps: FPS,
            contact_tau: 0.05,
            robot_type: "fixture-bot",
            human_joints: HUMAN_PARENTS.map((_, i) => `h${i}`),
            human_parents: HUMAN_PARENTS,
            robot_joints: ROBOT_PARENTS.map((_, i) => `r${i}`),
            robot_parents: ROBOT_PARENTS,
            robot_end_effectors: ROBOT_EFFECTORS,
            vocab: ["high-five", "wave", "push"],
          });
          break;
        case "human_frame": {
          const t = Number(
            (msg.payload as { timestamp?: unknown }).timestamp ?? 0,
          );
          this.append({ kind: "human_frame", timestamp: t, joints: msg.payload.joints, root: msg.payload.root });
          this.sendRobotFrame(socket, t);
          break;
        }
        case "set_command":
          this.send(socket, "session_meta", {
            ...this.meta(),
            command: (msg.payload as { command?: unknown }).command,
          });
          break;
        case "feedback": {
          this.append({
            kind: "feedback",
            rating: (msg.payload as { rating?: unknown }).rating,
            note: (msg.payload as { note?: unknown }).note ?? null,
            at: Date.now() / 1000,
          });
          const count = this.received.filter((m) => m.type === "feedback").length;
          this.send(socket, "session_meta", {
            session_id: this.sessionId,
            ack: "feedback",
            record_id: `${this.sessionId}#${count}`,
          });
          break;
        }
        case "session_meta": {
          const request = (msg.payload as { request?: unknown }).request;
          if (request === "select_recording") {
            this.recording = String(
              (msg.payload as { recording?: unknown }).recording,
            );
            this.position = 0;
            this.playing = false;
          } else if (request === "play") {
            this.startPlayback(socket);
          } else if (request === "pause") {
            this.playing = false;
          } else if (request === "scrub") {
            this.position = Math.round(
              Number((msg.payload as { t?: unknown }).t ?? 0) * FPS,
            );
          }
          this.send(socket, "session_meta", this.meta());
          break;
        }
        case "heartbeat":
          this.send(socket, "heartbeat", {});
          break;
        default:
          this.send(socket, "error", { message: `unexpected ${msg.type}` });
      }
    });
  }

  sessionFilePath(): string {
    return this.sessionFile;
  }

  async close(): Promise<void> {
    if (this.playTimer) clearInterval(this.playTimer);
    for (const client of this.wss.clients) client.terminate();
    await new Promise<void>((resolve) => this.wss.close(() => resolve()));
  }
}
