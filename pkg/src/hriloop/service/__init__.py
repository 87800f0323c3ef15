from .bench import LatencyReport, bench_latency
from .pipeline import BoundedQueue, SessionPipeline
from .protocol import (
    MAX_MESSAGE_BYTES,
    MESSAGE_TYPES,
    FrameDecoder,
    WireMessage,
    decode_body,
    decode_message,
    encode_message,
    message_body,
    read_message,
    write_message,
)
from .server import Service, ServiceConfig, serve
from .sessions import (
    SessionRecorder,
    human_frames_from_session,
    read_session_record,
    replay_source,
)

__all__ = [
    "BoundedQueue",
    "FrameDecoder",
    "LatencyReport",
    "MAX_MESSAGE_BYTES",
    "MESSAGE_TYPES",
    "Service",
    "ServiceConfig",
    "SessionPipeline",
    "SessionRecorder",
    "WireMessage",
    "bench_latency",
    "decode_body",
    "decode_message",
    "encode_message",
    "human_frames_from_session",
    "message_body",
    "read_message",
    "read_session_record",
    "replay_source",
    "serve",
    "write_message",
]
