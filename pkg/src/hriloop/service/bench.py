"""Latency benchmark: drive a real loopback TCP session at a fixed rate and
measure per-stage plus end-to-end times."""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .. import assets
from ..skeleton import forward_kinematics, rest_pose
from .protocol import WireMessage, read_message, write_message
from .server import Service, ServiceConfig
from .sessions import frame_payload

PERCENTILES = (50, 95, 99)


@dataclass
class LatencyReport:
    stage_ms: dict[str, dict[str, float]]  # stage -> {p50, p95, p99, mean, min}
    end_to_end_ms: dict[str, float]
    throughput_fps: float
    frames_sent: int
    frames_received: int
    drops: int
    duration_s: float
    input_fps: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def percentiles_monotone(self) -> bool:
        groups = list(self.stage_ms.values()) + [self.end_to_end_ms]
        return all(g["p50"] <= g["p95"] <= g["p99"] for g in groups)


def _summary(samples: list[float]) -> dict[str, float]:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.size == 0:
        return {"p50": 0.0, "p95": 0.0, "p99": 0.0, "mean": 0.0, "min": 0.0}
    p = np.percentile(arr, PERCENTILES)
    return {
        "p50": float(p[0]),
        "p95": float(p[1]),
        "p99": float(p[2]),
        "mean": float(arr.mean()),
        "min": float(arr.min()),
    }


async def _bench_async(
    config: ServiceConfig, duration: float, fps: float, model=None
) -> LatencyReport:
    service = Service(config, model=model)
    await service.start()
    human_spec = service.human_spec
    rest = forward_kinematics(human_spec, rest_pose(human_spec))

    reader, writer = await asyncio.open_connection("127.0.0.1", service.tcp_port)
    received: dict[int, tuple[float, dict]] = {}
    sent: dict[int, float] = {}

    async def reader_task():
        while True:
            try:
                msg = await read_message(reader)
            except (asyncio.IncompleteReadError, ConnectionResetError):
                return
            if msg.type == "robot_frame":
                received[int(msg.payload["echo_seq"])] = (
                    time.perf_counter(),
                    msg.payload,
                )

    rt = asyncio.create_task(reader_task())
    await write_message(writer, WireMessage(type="hello", payload={}, seq=1))

    frame_count = int(duration * fps)
    start = time.perf_counter()
    seq = 1
    for i in range(frame_count):
        deadline = start + i / fps
        delay = deadline - time.perf_counter()
        if delay > 0:
            await asyncio.sleep(delay)
        seq += 1
        payload = frame_payload(
            type(rest)(rest.joint_positions, rest.root, i / fps)
        )
        now = time.perf_counter()
        sent[seq] = now
        await write_message(
            writer, WireMessage(type="human_frame", payload=payload, seq=seq, ts=now)
        )
    # drain the tail of the pipeline
    await asyncio.sleep(min(1.0, 50.0 / fps))
    seq += 1
    await write_message(writer, WireMessage(type="session_meta", payload={}, seq=seq))
    await asyncio.sleep(0.2)

    session = next(iter(service.sessions.values()), None)
    drops = session.pipeline.drops if session else 0

    writer.close()
    rt.cancel()
    await service.stop()

    e2e, stages = [], {s: [] for s in ("decode", "surface", "model", "retarget", "encode")}
    for s, (t_recv, payload) in received.items():
        if s in sent:
            e2e.append((t_recv - sent[s]) * 1e3)
        for stage, ms in payload.get("timing_ms", {}).items():
            stages.setdefault(stage, []).append(ms)

    wall = time.perf_counter() - start
    return LatencyReport(
        stage_ms={k: _summary(v) for k, v in stages.items()},
        end_to_end_ms=_summary(e2e),
        throughput_fps=len(received) / wall if wall > 0 else 0.0,
        frames_sent=frame_count,
        frames_received=len(received),
        drops=drops,
        duration_s=wall,
        input_fps=fps,
    )


def bench_latency(
    config: ServiceConfig, duration: float = 10.0, fps: float = 10.0, model=None
) -> LatencyReport:
    """Run the loopback benchmark (blocking wrapper)."""
    return asyncio.run(_bench_async(config, duration, fps, model=model))
