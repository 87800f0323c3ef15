"""Session persistence and replay.

A session file is an append-only JSON-lines stream: one header line, then
human_frame / robot_frame / feedback lines in arrival order. Sessions are
self-contained: metrics and fine-tuning run from these files alone.
"""

from __future__ import annotations

import asyncio
import json
import time
from pathlib import Path
from typing import AsyncIterator

import numpy as np

from ..adaptation import InteractionRecord
from ..data.interchange import _root_from_json, _root_to_json
from ..errors import DataFormatError
from ..skeleton import MotionFrame, MotionSequence, SkeletonSpec

SESSION_FORMAT = "hriloop-session-v1"


class SessionRecorder:
    """Append-only writer for one session's stream."""

    def __init__(self, path: str | Path, session_id: str, command: str, fps: float,
                 robot_type: str):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.session_id = session_id
        self._f = open(self.path, "a", encoding="utf-8")
        self._append(
            {
                "kind": "header",
                "format": SESSION_FORMAT,
                "session_id": session_id,
                "command": command,
                "fps": fps,
                "robot_type": robot_type,
                "started_at": time.time(),
            }
        )

    def _append(self, record: dict, flush: bool = True) -> None:
        self._f.write(json.dumps(record) + "\n")
        if flush:
            self._f.flush()

    def human_frame(self, frame: MotionFrame) -> None:
        # frames are buffered; feedback and control lines force a flush
        self._append(
            {
                "kind": "human_frame",
                "timestamp": frame.timestamp,
                "joints": frame.joint_positions.tolist(),
                "root": _root_to_json(frame.root),
            },
            flush=False,
        )

    def robot_frame(self, frame: MotionFrame, angles: np.ndarray) -> None:
        self._append(
            {
                "kind": "robot_frame",
                "timestamp": frame.timestamp,
                "joints": frame.joint_positions.tolist(),
                "root": _root_to_json(frame.root),
                "angles": np.asarray(angles).tolist(),
            },
            flush=False,
        )

    def feedback(self, rating: int, note: str | None = None) -> None:
        self._append(
            {"kind": "feedback", "rating": rating, "note": note, "at": time.time()}
        )

    def set_command(self, command: str) -> None:
        self._append({"kind": "set_command", "command": command, "at": time.time()})

    def close(self) -> None:
        self._f.close()


def read_session_record(
    path: str | Path, human_spec: SkeletonSpec, robot_spec: SkeletonSpec
) -> InteractionRecord | None:
    """Rebuild one InteractionRecord from a session file.

    Returns None for sessions with no paired frames. With several feedback
    lines, the most recent rating wins (the store is append-only).
    """
    path = Path(path)
    header = None
    human_frames: list[MotionFrame] = []
    robot_frames: list[MotionFrame] = []
    rating = None
    notes: list[str] = []
    with open(path, "r", encoding="utf-8") as f:
        for i, line in enumerate(f):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataFormatError(f"{path}: bad line: {e}", record_index=i) from e
            kind = rec.get("kind")
            if kind == "header":
                header = rec
            elif kind == "human_frame":
                human_frames.append(
                    MotionFrame(
                        np.array(rec["joints"]), _root_from_json(rec["root"]),
                        float(rec["timestamp"]),
                    )
                )
            elif kind == "robot_frame":
                robot_frames.append(
                    MotionFrame(
                        np.array(rec["joints"]), _root_from_json(rec["root"]),
                        float(rec["timestamp"]),
                    )
                )
            elif kind == "feedback":
                rating = rec.get("rating")
                if rec.get("note"):
                    notes.append(rec["note"])
    if header is None:
        raise DataFormatError(f"{path}: missing session header", record_index=0)
    n = min(len(human_frames), len(robot_frames))
    if n == 0:
        return None
    fps = float(header["fps"])
    try:
        human_seq = MotionSequence(human_spec, tuple(human_frames[:n]), fps)
        robot_seq = MotionSequence(robot_spec, tuple(robot_frames[:n]), fps)
    except Exception as e:
        raise DataFormatError(f"{path}: inconsistent session frames: {e}") from e
    return InteractionRecord(
        session_id=header["session_id"],
        human_seq=human_seq,
        robot_seq=robot_seq,
        command_text=header.get("command", ""),
        rating=rating,
        note="\n".join(notes) if notes else None,
        started_at=float(header.get("started_at", 0.0)),
    )


def frame_payload(frame: MotionFrame) -> dict:
    return {
        "timestamp": frame.timestamp,
        "joints": frame.joint_positions.tolist(),
        "root": _root_to_json(frame.root),
    }


async def replay_source(
    frames: list[MotionFrame], fps: float, realtime: bool = True
) -> AsyncIterator[dict]:
    """Yield human_frame payloads, paced to the frame rate when realtime."""
    start = time.perf_counter()
    for i, frame in enumerate(frames):
        if realtime:
            deadline = start + i / fps
            delay = deadline - time.perf_counter()
            if delay > 0:
                await asyncio.sleep(delay)
        yield frame_payload(frame)


def human_frames_from_session(
    path: str | Path, human_spec: SkeletonSpec
) -> tuple[list[MotionFrame], float]:
    """Extract just the human stream (for replay) from a session file."""
    path = Path(path)
    frames = []
    fps = 10.0
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("kind") == "header":
                fps = float(rec["fps"])
            elif rec.get("kind") == "human_frame":
                frames.append(
                    MotionFrame(
                        np.array(rec["joints"]), _root_from_json(rec["root"]),
                        float(rec["timestamp"]),
                    )
                )
    return frames, fps
