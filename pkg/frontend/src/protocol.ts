/**
 * Wire message schema, mirroring the service exactly: the WebSocket bridge
 * carries the same JSON bodies as the raw TCP stream, one per text frame.
 */

export const MESSAGE_TYPES = [
  "hello",
  "human_frame",
  "robot_frame",
  "set_command",
  "feedback",
  "heartbeat",
  "error",
  "session_meta",
] as const;

export type MessageType = (typeof MESSAGE_TYPES)[number];

export interface WireMessage {
  type: MessageType;
  payload: Record<string, unknown>;
  seq: number;
  ts: number;
}

export interface RootTransform {
  rotation: [number, number, number, number];
  translation: [number, number, number];
  scale: number;
}

export interface FramePayload {
  timestamp: number;
  joints: number[][];
  root: RootTransform;
}

export interface RobotFramePayload extends FramePayload {
  angles: number[][];
  frame_type: string;
  session_id?: string;
  contact_distance?: number[];
  echo_seq?: number;
  timing_ms?: Record<string, number>;
}

export interface HelloPayload {
  session_id: string;
  command: string;
  fps: number;
  contact_tau: number;
  robot_type: string;
  human_joints: string[];
  human_parents: number[];
  robot_joints: string[];
  robot_parents: number[];
  robot_end_effectors: number[];
  vocab: string[];
}

export interface PlaybackState {
  recording: string;
  frames: number;
  position: number;
  playing: boolean;
}

export function encodeMessage(m: WireMessage): string {
  return JSON.stringify({ payload: m.payload, seq: m.seq, ts: m.ts, type: m.type });
}

export class ProtocolError extends Error {}

export function decodeMessage(text: string): WireMessage {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (e) {
    throw new ProtocolError(`malformed JSON: ${(e as Error).message}`);
  }
  if (typeof obj !== "object" || obj === null) {
    throw new ProtocolError("message must be a JSON object");
  }
  const rec = obj as Record<string, unknown>;
  const type = rec.type as MessageType;
  if (!MESSAGE_TYPES.includes(type)) {
    throw new ProtocolError(`unknown message type ${String(rec.type)}`);
  }
  const payload = (rec.payload ?? {}) as Record<string, unknown>;
  if (typeof payload !== "object" || Array.isArray(payload)) {
    throw new ProtocolError("payload must be an object");
  }
  return {
    type,
    payload,
    seq: Number(rec.seq ?? 0),
    ts: Number(rec.ts ?? 0),
  };
}
