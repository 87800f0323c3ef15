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
];
export function encodeMessage(m) {
    return JSON.stringify({ payload: m.payload, seq: m.seq, ts: m.ts, type: m.type });
}
export class ProtocolError extends Error {
}
export function decodeMessage(text) {
    let obj;
    try {
        obj = JSON.parse(text);
    }
    catch (e) {
        throw new ProtocolError(`malformed JSON: ${e.message}`);
    }
    if (typeof obj !== "object" || obj === null) {
        throw new ProtocolError("message must be a JSON object");
    }
    const rec = obj;
    const type = rec.type;
    if (!MESSAGE_TYPES.includes(type)) {
        throw new ProtocolError(`unknown message type ${String(rec.type)}`);
    }
    const payload = (rec.payload ?? {});
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
//# sourceMappingURL=protocol.js.map