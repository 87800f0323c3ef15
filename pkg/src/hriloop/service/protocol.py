"""Wire protocol: 4-byte big-endian length prefix + canonical UTF-8 JSON.

The WebSocket bridge sends the identical JSON body as a text frame (the
WebSocket layer already provides framing), so there is exactly one message
schema to test. Canonical form sorts keys and strips spaces, which pins the
on-wire bytes for any given message.
"""

from __future__ import annotations

import asyncio
import json
import struct
from dataclasses import dataclass, field

from ..errors import ProtocolError

MAX_MESSAGE_BYTES = 16 * 1024 * 1024
LENGTH_PREFIX = struct.Struct(">I")

MESSAGE_TYPES = (
    "hello",
    "human_frame",
    "robot_frame",
    "set_command",
    "feedback",
    "heartbeat",
    "error",
    "session_meta",
)

# payload keys that must be present, per type (extra keys are allowed)
_REQUIRED_KEYS: dict[str, tuple[str, ...]] = {
    "hello": (),
    "human_frame": ("timestamp", "joints", "root"),
    "robot_frame": ("timestamp", "joints", "root", "angles", "frame_type"),
    "set_command": ("command",),
    "feedback": ("rating",),
    "heartbeat": (),
    "error": ("message",),
    "session_meta": (),
}


@dataclass(frozen=True)
class WireMessage:
    type: str
    payload: dict = field(default_factory=dict)
    seq: int = 0
    ts: float = 0.0  # monotonic send timestamp, seconds

    def __post_init__(self):
        if self.type not in MESSAGE_TYPES:
            raise ProtocolError(f"unknown message type {self.type!r}")
        if not isinstance(self.payload, dict):
            raise ProtocolError("payload must be an object")
        missing = [k for k in _REQUIRED_KEYS[self.type] if k not in self.payload]
        if missing:
            raise ProtocolError(f"{self.type} payload missing keys {missing}")
        if self.type == "feedback":
            rating = self.payload["rating"]
            if not isinstance(rating, int) or not (1 <= rating <= 5):
                raise ProtocolError(f"feedback rating must be 1..5, got {rating!r}")


def message_body(m: WireMessage) -> bytes:
    body = json.dumps(
        {"payload": m.payload, "seq": m.seq, "ts": m.ts, "type": m.type},
        sort_keys=True,
        separators=(",", ":"),
        allow_nan=False,
    ).encode("utf-8")
    if len(body) > MAX_MESSAGE_BYTES:
        raise ProtocolError(f"message of {len(body)} bytes exceeds the 16 MiB cap")
    return body


def encode_message(m: WireMessage) -> bytes:
    body = message_body(m)
    return LENGTH_PREFIX.pack(len(body)) + body


def decode_body(body: bytes | str) -> WireMessage:
    if isinstance(body, bytes):
        if not body:
            raise ProtocolError("empty message body")
        try:
            body = body.decode("utf-8")
        except UnicodeDecodeError as e:
            raise ProtocolError(f"body is not UTF-8: {e}") from e
    if not body:
        raise ProtocolError("empty message body")
    try:
        obj = json.loads(body)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"malformed JSON: {e}") from e
    if not isinstance(obj, dict):
        raise ProtocolError("message must be a JSON object")
    try:
        return WireMessage(
            type=obj["type"],
            payload=obj.get("payload", {}),
            seq=int(obj.get("seq", 0)),
            ts=float(obj.get("ts", 0.0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ProtocolError(f"bad message fields: {e}") from e


def decode_message(data: bytes) -> WireMessage:
    """Decode one complete length-prefixed frame."""
    if len(data) < LENGTH_PREFIX.size:
        raise ProtocolError("truncated length prefix")
    (length,) = LENGTH_PREFIX.unpack(data[: LENGTH_PREFIX.size])
    if length > MAX_MESSAGE_BYTES:
        raise ProtocolError(f"declared length {length} exceeds the 16 MiB cap")
    body = data[LENGTH_PREFIX.size :]
    if len(body) != length:
        raise ProtocolError(f"frame length mismatch: declared {length}, got {len(body)}")
    return decode_body(body)


class FrameDecoder:
    """Incremental decoder for a length-prefixed byte stream."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[WireMessage]:
        self._buf.extend(data)
        out = []
        while True:
            if len(self._buf) < LENGTH_PREFIX.size:
                break
            (length,) = LENGTH_PREFIX.unpack(self._buf[: LENGTH_PREFIX.size])
            if length > MAX_MESSAGE_BYTES:
                raise ProtocolError(f"declared length {length} exceeds the 16 MiB cap")
            if len(self._buf) < LENGTH_PREFIX.size + length:
                break
            body = bytes(self._buf[LENGTH_PREFIX.size : LENGTH_PREFIX.size + length])
            del self._buf[: LENGTH_PREFIX.size + length]
            out.append(decode_body(body))
        return out


async def read_message(reader: asyncio.StreamReader) -> WireMessage:
    header = await reader.readexactly(LENGTH_PREFIX.size)
    (length,) = LENGTH_PREFIX.unpack(header)
    if length > MAX_MESSAGE_BYTES:
        raise ProtocolError(f"declared length {length} exceeds the 16 MiB cap")
    body = await reader.readexactly(length)
    return decode_body(body)


async def write_message(writer: asyncio.StreamWriter, m: WireMessage) -> None:
    writer.write(encode_message(m))
    await writer.drain()
