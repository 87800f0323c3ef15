"""Streaming runtime: raw TCP (length-prefixed JSON) plus a WebSocket bridge
speaking the identical JSON schema, with per-session pipelines, recording,
idle detection, and replay-driven playback control."""

from __future__ import annotations

import asyncio
import logging
import mimetypes
import time
import uuid
from dataclasses import dataclass, field
from http import HTTPStatus
from pathlib import Path

import numpy as np

from .. import assets
from ..errors import HriLoopError, ProtocolError
from ..model.checkpoint import load_checkpoint
from ..model.layers import use_single_thread
from ..skeleton import MotionFrame, SkeletonSpec, resample
from ..surface import build_binding
from .pipeline import (
    DummyStepper,
    IkRetargeter,
    LearnedRetargeter,
    ModelStepper,
    SessionPipeline,
    ZeroRetargeter,
    _SENTINEL,
)
from .protocol import WireMessage, encode_message, message_body, read_message
from .sessions import SessionRecorder, human_frames_from_session

log = logging.getLogger(__name__)


@dataclass
class ServiceConfig:
    tcp_host: str = "127.0.0.1"
    tcp_port: int = 8750
    ws_host: str = "127.0.0.1"
    ws_port: int = 8751
    checkpoint: str | None = None
    retargeter: str = "ik"  # "ik" | "zero" | path to a retargeter checkpoint
    sessions_dir: str = "sessions"
    recordings_dir: str | None = None
    static_dir: str | None = None
    queue_depth: int = 4
    idle_timeout: float = 2.0
    fps: float = 10.0
    default_command: str | None = None
    contact_tau: float = 0.05
    dummy_model: bool = False


class Session:
    """One active session: pipeline, recorder, playback, idle watchdog."""

    def __init__(self, service: "Service", send, session_id: str, command: str):
        self.service = service
        self.send = send  # async fn(type, payload)
        self.session_id = session_id
        self.command = command
        cfg = service.config
        stepper = service.make_stepper(command)
        self.pipeline = SessionPipeline(
            human_spec=service.human_spec,
            stepper=stepper,
            retargeter=service.retargeter,
            binding=service.binding,
            queue_depth=cfg.queue_depth,
            effector_indices=service.robot_spec.end_effector_indices,
        )
        self.recorder = SessionRecorder(
            Path(cfg.sessions_dir) / f"{session_id}.jsonl",
            session_id,
            command,
            cfg.fps,
            service.robot_spec.name,
        )
        self.last_human = time.perf_counter()
        self.idle = False
        self.stale_dropped = 0
        self.last_in_seq = -1
        self.feedback_count = 0
        self.playback: _Playback | None = None
        self._tasks: list[asyncio.Task] = []

    def start(self) -> None:
        self.pipeline.start()
        self._tasks = [
            asyncio.create_task(self._pump_out()),
            asyncio.create_task(self._idle_watchdog()),
        ]

    async def close(self) -> None:
        if self.playback:
            self.playback.stop()
        await self.pipeline.stop()
        for t in self._tasks:
            t.cancel()
        self.recorder.close()

    async def _pump_out(self) -> None:
        while True:
            item = await self.pipeline.out.get()
            if item is _SENTINEL:
                return
            payload = dict(item.payload)
            payload["session_id"] = self.session_id
            await self.send("robot_frame", payload)
            self.recorder.robot_frame(item.executed, item.angles)

    async def _idle_watchdog(self) -> None:
        cfg = self.service.config
        while True:
            await asyncio.sleep(cfg.idle_timeout / 2.0)
            quiet = time.perf_counter() - self.last_human
            if quiet >= cfg.idle_timeout and not self.idle:
                self.idle = True
                await self.send("session_meta", self.meta(state="idle"))
            elif quiet < cfg.idle_timeout and self.idle:
                self.idle = False
                await self.send("session_meta", self.meta(state="active"))

    def meta(self, state: str | None = None) -> dict:
        stats = self.pipeline.stats()
        stats.update(
            {
                "session_id": self.session_id,
                "command": self.command,
                "state": state or ("idle" if self.idle else "active"),
                "stale_dropped": self.stale_dropped,
                "contact_tau": self.service.config.contact_tau,
                "fps": self.service.config.fps,
            }
        )
        if self.playback:
            stats["playback"] = self.playback.describe()
        return stats

    async def on_human_frame(self, msg: WireMessage) -> None:
        self.last_human = time.perf_counter()
        frame_payload = msg.payload
        await self.pipeline.submit(msg.seq, frame_payload, msg.ts)
        joints = np.asarray(frame_payload["joints"], dtype=np.float64)
        from ..skeleton import RigidTransform

        root_d = frame_payload.get("root", {})
        frame = MotionFrame(
            joints,
            RigidTransform(
                rotation=np.asarray(root_d.get("rotation", [1, 0, 0, 0]), float),
                translation=np.asarray(root_d.get("translation", [0, 0, 0]), float),
                scale=float(root_d.get("scale", 1.0)),
            ),
            float(frame_payload["timestamp"]),
        )
        self.recorder.human_frame(frame)

    async def on_set_command(self, msg: WireMessage) -> None:
        text = str(msg.payload["command"])
        self.pipeline.stepper.set_command(text)
        self.command = text
        self.recorder.set_command(text)
        await self.send("session_meta", self.meta())

    async def on_feedback(self, msg: WireMessage) -> None:
        rating = msg.payload["rating"]
        note = msg.payload.get("note")
        self.recorder.feedback(rating, note)
        self.feedback_count += 1
        await self.send(
            "session_meta",
            {
                "session_id": self.session_id,
                "ack": "feedback",
                "record_id": f"{self.session_id}#{self.feedback_count}",
            },
        )

    async def on_session_meta(self, msg: WireMessage) -> None:
        request = msg.payload.get("request")
        if request == "select_recording":
            await self._select_recording(str(msg.payload.get("recording", "")))
        elif request == "play":
            if self.playback:
                self.playback.play()
        elif request == "pause":
            if self.playback:
                self.playback.pause()
        elif request == "scrub":
            if self.playback:
                self.playback.scrub(float(msg.payload.get("t", 0.0)))
        await self.send("session_meta", self.meta())

    async def _select_recording(self, name: str) -> None:
        frames = self.service.load_recording(name)
        if self.playback:
            self.playback.stop()
        self.playback = _Playback(self, frames, self.service.config.fps, name)


class _Playback:
    """Server-side human stream source: replays a recording or a synthetic
    action through the session pipeline with play/pause/scrub control."""

    def __init__(self, session: Session, frames: list[MotionFrame], fps: float, name: str):
        self.session = session
        self.frames = frames
        self.fps = fps
        self.name = name
        self.index = 0
        self.playing = False
        self.seq = 10_000_000  # playback frames get their own seq space
        self._task: asyncio.Task | None = None

    def describe(self) -> dict:
        return {
            "recording": self.name,
            "frames": len(self.frames),
            "position": self.index,
            "playing": self.playing,
        }

    def play(self) -> None:
        if not self.playing:
            self.playing = True
            self._task = asyncio.create_task(self._run())

    def pause(self) -> None:
        self.playing = False

    def stop(self) -> None:
        self.playing = False
        if self._task:
            self._task.cancel()

    def scrub(self, t: float) -> None:
        self.index = max(0, min(int(round(t * self.fps)), len(self.frames) - 1))

    async def _run(self) -> None:
        from .sessions import frame_payload

        start = time.perf_counter()
        base_index = self.index
        while self.playing and self.index < len(self.frames):
            deadline = start + (self.index - base_index) / self.fps
            delay = deadline - time.perf_counter()
            if delay > 0:
                await asyncio.sleep(delay)
            if not self.playing:
                return
            frame = self.frames[self.index]
            self.seq += 1
            self.session.last_human = time.perf_counter()
            await self.session.pipeline.submit(
                self.seq, frame_payload(frame), time.perf_counter()
            )
            self.session.recorder.human_frame(frame)
            self.index += 1
        self.playing = False


class Service:
    def __init__(
        self,
        config: ServiceConfig,
        model=None,
        human_spec: SkeletonSpec | None = None,
        robot_spec: SkeletonSpec | None = None,
    ):
        use_single_thread()
        self.config = config
        if model is None and config.checkpoint:
            model = load_checkpoint(config.checkpoint)
        self.model = model
        if self.model is None and not config.dummy_model:
            raise HriLoopError("service needs a model checkpoint or dummy_model=True")
        if self.model is not None:
            human_name = self.model.config.human_skeleton
            robot_name = self.model.config.robot_skeleton
            self.human_spec = human_spec or assets.load_skeleton(human_name)
            self.robot_spec = robot_spec or assets.load_skeleton(robot_name)
            vertex_count = self.model.config.vertex_count
        else:
            self.human_spec = human_spec or assets.load_skeleton("human22")
            self.robot_spec = robot_spec or assets.load_skeleton("unitree_h1")
            vertex_count = 64
        self.binding = build_binding(self.human_spec, vertex_count)
        self.retargeter = self._make_retargeter()
        self.sessions: dict[str, Session] = {}
        self._servers: list = []
        Path(config.sessions_dir).mkdir(parents=True, exist_ok=True)

    def _make_retargeter(self):
        kind = self.config.retargeter
        if kind == "ik":
            return IkRetargeter(self.robot_spec)
        if kind == "zero":
            return ZeroRetargeter(self.robot_spec.joint_count)
        model = load_checkpoint(kind)
        return LearnedRetargeter(model, self.robot_spec)

    def make_stepper(self, command: str):
        if self.config.dummy_model or self.model is None:
            return DummyStepper(self.robot_spec)
        return ModelStepper(self.model, self.robot_spec, command)

    def default_command(self) -> str:
        if self.config.default_command:
            return self.config.default_command
        if self.model is not None and len(self.model.vocab):
            return self.model.vocab.words[0]
        return "idle"

    def load_recording(self, name: str) -> list[MotionFrame]:
        if name.startswith("synth:"):
            parts = name.split(":")
            action = parts[1]
            seed = int(parts[2]) if len(parts) > 2 else 0
            from ..data.synth import generate_pair

            pair = generate_pair(action, seed=seed)
            seq = resample(pair.actor, self.config.fps)
            return list(seq.frames)
        base = Path(self.config.recordings_dir or self.config.sessions_dir)
        path = base / name
        if not path.exists():
            raise ProtocolError(f"no recording named {name!r}")
        frames, _ = human_frames_from_session(path, self.human_spec)
        return frames

    # -- connection handling -------------------------------------------------

    async def _handle_session_stream(self, send, recv) -> None:
        """Shared TCP/WS session loop. `send(type, payload)`, `recv()` ->
        WireMessage or None on EOF."""
        out_seq = [0]
        raw_send = send

        async def send_msg(mtype: str, payload: dict) -> None:
            out_seq[0] += 1
            await raw_send(
                WireMessage(
                    type=mtype, payload=payload, seq=out_seq[0], ts=time.perf_counter()
                )
            )

        session: Session | None = None
        try:
            while True:
                try:
                    msg = await recv()
                except ProtocolError as e:
                    await send_msg("error", {"message": str(e)})
                    continue
                if msg is None:
                    return
                if session is None:
                    if msg.type != "hello":
                        await send_msg(
                            "error", {"message": "first message must be hello"}
                        )
                        continue
                    session_id = str(
                        msg.payload.get("session_id") or uuid.uuid4().hex[:12]
                    )
                    command = str(
                        msg.payload.get("command") or self.default_command()
                    )
                    session = Session(self, send_msg, session_id, command)
                    session.start()
                    self.sessions[session_id] = session
                    hello = {
                        "session_id": session_id,
                        "command": command,
                        "fps": self.config.fps,
                        "contact_tau": self.config.contact_tau,
                        "robot_type": self.robot_spec.name,
                        "human_joints": self.human_spec.joint_names,
                        "human_parents": self.human_spec.parents,
                        "robot_joints": self.robot_spec.joint_names,
                        "robot_parents": self.robot_spec.parents,
                        "robot_end_effectors": self.robot_spec.end_effector_indices,
                        "vocab": list(self.model.vocab.words) if self.model else [],
                    }
                    await send_msg("hello", hello)
                    continue
                if msg.seq <= session.last_in_seq:
                    session.stale_dropped += 1
                    await send_msg(
                        "error",
                        {
                            "message": f"stale sequence {msg.seq} <= {session.last_in_seq}",
                            "stale_dropped": session.stale_dropped,
                        },
                    )
                    continue
                session.last_in_seq = msg.seq
                try:
                    await self._dispatch(session, msg, send_msg)
                except ProtocolError as e:
                    await send_msg("error", {"message": str(e)})
        finally:
            if session is not None:
                self.sessions.pop(session.session_id, None)
                await session.close()

    async def _dispatch(self, session: Session, msg: WireMessage, send_msg) -> None:
        if msg.type == "human_frame":
            await session.on_human_frame(msg)
        elif msg.type == "set_command":
            await session.on_set_command(msg)
        elif msg.type == "feedback":
            await session.on_feedback(msg)
        elif msg.type == "heartbeat":
            await send_msg("heartbeat", {})
        elif msg.type == "session_meta":
            await session.on_session_meta(msg)
        elif msg.type == "hello":
            await send_msg("error", {"message": "session already established"})
        else:
            await send_msg("error", {"message": f"unexpected {msg.type}"})

    async def _tcp_handler(self, reader, writer) -> None:
        write_lock = asyncio.Lock()

        async def send(m: WireMessage) -> None:
            async with write_lock:
                writer.write(encode_message(m))
                await writer.drain()

        async def recv():
            try:
                return await read_message(reader)
            except (asyncio.IncompleteReadError, ConnectionResetError):
                return None

        try:
            await self._handle_session_stream(send, recv)
        except Exception:
            log.exception("tcp session crashed (other sessions unaffected)")
        finally:
            writer.close()

    async def _ws_handler(self, connection) -> None:
        from websockets.exceptions import ConnectionClosed

        async def send(m: WireMessage) -> None:
            await connection.send(message_body(m).decode("utf-8"))

        async def recv():
            from .protocol import decode_body

            try:
                raw = await connection.recv()
            except ConnectionClosed:
                return None
            return decode_body(raw if isinstance(raw, bytes) else raw.encode("utf-8"))

        try:
            await self._handle_session_stream(send, recv)
        except Exception:
            log.exception("ws session crashed (other sessions unaffected)")

    def _static_response(self, connection, request):
        """Serve static assets for plain HTTP requests; let /ws upgrade."""
        from websockets.http11 import Response
        from websockets.datastructures import Headers

        path = request.path.split("?")[0]
        if path == "/ws" or "websocket" in (
            request.headers.get("Upgrade", "").lower()
        ):
            return None
        static_dir = self.config.static_dir
        if static_dir is None:
            return Response(
                HTTPStatus.NOT_FOUND, "Not Found", Headers(), b"no static assets"
            )
        rel = path.lstrip("/") or "index.html"
        target = (Path(static_dir) / rel).resolve()
        if not str(target).startswith(str(Path(static_dir).resolve())) or not target.is_file():
            return Response(HTTPStatus.NOT_FOUND, "Not Found", Headers(), b"not found")
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        body = target.read_bytes()
        headers = Headers()
        headers["Content-Type"] = ctype
        headers["Content-Length"] = str(len(body))
        return Response(HTTPStatus.OK, "OK", headers, body)

    async def start(self) -> None:
        self._tcp_server = await asyncio.start_server(
            self._tcp_handler, self.config.tcp_host, self.config.tcp_port
        )
        self._servers.append(self._tcp_server)
        from websockets.asyncio.server import serve as ws_serve

        self._ws_server = await ws_serve(
            self._ws_handler,
            self.config.ws_host,
            self.config.ws_port,
            process_request=self._static_response,
        )

    @property
    def tcp_port(self) -> int:
        return self._tcp_server.sockets[0].getsockname()[1]

    @property
    def ws_port(self) -> int:
        return list(self._ws_server.sockets)[0].getsockname()[1]

    async def stop(self) -> None:
        for session in list(self.sessions.values()):
            await session.close()
        self.sessions.clear()
        self._tcp_server.close()
        await self._tcp_server.wait_closed()
        self._ws_server.close(close_connections=True)
        await self._ws_server.wait_closed()


async def serve(config: ServiceConfig, model=None) -> Service:
    """Start the service; returns the running instance."""
    service = Service(config, model=model)
    await service.start()
    log.info(
        "serving tcp on %s:%s, ws on %s:%s",
        config.tcp_host,
        service.tcp_port,
        config.ws_host,
        service.ws_port,
    )
    return service
