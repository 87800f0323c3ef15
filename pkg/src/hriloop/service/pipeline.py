"""Session pipeline: independently scheduled stage workers joined by bounded
FIFO queues.

Only the intake queue drops (oldest first) under pressure: the freshest
human observation is what a receding-horizon controller wants, and every
accepted frame must produce exactly one robot frame downstream. Each stage
stamps its own wall time onto the work item for latency reporting.
"""

from __future__ import annotations

import asyncio
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np

from ..errors import ProtocolError
from ..model.command import ActionCommand, make_command
from ..model.network import InteractionModel, initial_state, step
from ..retarget.kinematic import skeleton_to_pose_ik
from ..retarget.online import OnlineRetargeter
from ..skeleton import (
    MotionFrame,
    MotionSequence,
    RigidTransform,
    SkeletonSpec,
    forward_kinematics,
    rest_pose,
)
from ..surface import SurfaceBinding, build_binding, pose_binding

STAGES = ("decode", "surface", "model", "retarget", "encode")

_SENTINEL = object()


class BoundedQueue:
    """FIFO with a hard capacity; either awaits space or drops the oldest."""

    def __init__(self, maxsize: int = 4, drop_oldest: bool = False):
        self.maxsize = maxsize
        self.drop_oldest = drop_oldest
        self.drops = 0
        self._items: deque = deque()
        self._not_empty = asyncio.Event()
        self._not_full = asyncio.Event()
        self._not_full.set()

    def __len__(self) -> int:
        return len(self._items)

    async def put(self, item) -> None:
        if self.drop_oldest:
            if len(self._items) >= self.maxsize:
                self._items.popleft()
                self.drops += 1
            self._items.append(item)
            self._not_empty.set()
            return
        while len(self._items) >= self.maxsize:
            self._not_full.clear()
            await self._not_full.wait()
        self._items.append(item)
        self._not_empty.set()

    async def get(self):
        while not self._items:
            self._not_empty.clear()
            await self._not_empty.wait()
        item = self._items.popleft()
        if len(self._items) < self.maxsize:
            self._not_full.set()
        return item


@dataclass
class WorkItem:
    seq: int
    payload: dict
    recv_ts: float  # sender's monotonic send timestamp (from the message)
    arrived: float = 0.0  # local perf_counter on intake
    frame: MotionFrame | None = None
    surface: object = None
    executed: MotionFrame | None = None
    angles: np.ndarray | None = None
    timings: dict[str, tuple[float, float]] = field(default_factory=dict)

    def stage_ms(self) -> dict[str, float]:
        return {k: (b - a) * 1e3 for k, (a, b) in self.timings.items()}


class Stepper(Protocol):
    def start_frame(self) -> MotionFrame: ...

    def step(self, frame: MotionFrame, surface) -> MotionFrame: ...

    def set_command(self, text: str) -> None: ...


class ModelStepper:
    """Wraps the learned model with its rollout state; exactly one worker
    owns an instance, so no locking is needed.

    Executed frames are clamped to a per-step displacement limit: a physical
    robot cannot teleport, and the bound also keeps a degenerate checkpoint
    from blowing up its own rollout history."""

    def __init__(
        self,
        model: InteractionModel,
        robot_spec: SkeletonSpec,
        command: str,
        max_step_m: float = 0.5,
        workspace_m: float = 5.0,
    ):
        self.model = model
        self.robot_spec = robot_spec
        self.max_step_m = max_step_m
        self.workspace_m = workspace_m
        self._start = forward_kinematics(robot_spec, rest_pose(robot_spec))
        self._anchor = self._start.joint_positions[0].copy()
        self.state = initial_state(model, self._start, make_command(command, model.vocab))

    def start_frame(self) -> MotionFrame:
        return self._start

    def set_command(self, text: str) -> None:
        if text not in self.model.vocab:
            raise ProtocolError(f"command {text!r} not in model vocabulary")
        from dataclasses import replace

        self.state = replace(
            self.state, command=make_command(text, self.model.vocab)
        )

    def _clamped(self, executed: MotionFrame) -> MotionFrame:
        prev = self.state.robot_frames[-1]
        lo = self._anchor - self.workspace_m
        hi = self._anchor + self.workspace_m
        delta = executed.joint_positions - prev.joint_positions
        norms = np.linalg.norm(delta, axis=1, keepdims=True)
        scale = np.minimum(1.0, self.max_step_m / np.maximum(norms, 1e-12))
        joints = np.clip(prev.joint_positions + delta * scale, lo, hi)
        if not np.all(np.isfinite(joints)):
            joints = prev.joint_positions
        root_t = executed.root.translation
        if not np.all(np.isfinite(root_t)):
            root = prev.root
        else:
            step_vec = root_t - prev.root.translation
            n = float(np.linalg.norm(step_vec))
            if n > self.max_step_m:
                step_vec = step_vec * (self.max_step_m / n)
            root = RigidTransform(
                rotation=executed.root.rotation,
                translation=np.clip(prev.root.translation + step_vec, lo, hi),
                scale=executed.root.scale,
            )
        return MotionFrame(joints, root, executed.timestamp)

    def step(self, frame: MotionFrame, surface) -> MotionFrame:
        from dataclasses import replace

        executed, _, new_state = step(self.state, (frame, surface), self.model)
        safe = self._clamped(executed)
        if safe is not executed:
            # history must carry what was actually executed
            new_state = replace(
                new_state,
                robot_frames=new_state.robot_frames[:-1] + (safe,),
            )
        self.state = new_state
        return safe


class DummyStepper:
    """Zero-work stand-in used for latency floor measurements."""

    def __init__(self, robot_spec: SkeletonSpec):
        self.robot_spec = robot_spec
        self._start = forward_kinematics(robot_spec, rest_pose(robot_spec))

    def start_frame(self) -> MotionFrame:
        return self._start

    def set_command(self, text: str) -> None:
        pass

    def step(self, frame: MotionFrame, surface) -> MotionFrame:
        return MotionFrame(
            self._start.joint_positions, self._start.root, frame.timestamp
        )


class Retargeter(Protocol):
    def angles_for(self, window: list[MotionFrame]) -> np.ndarray: ...


class IkRetargeter:
    """Per-frame IK on the latest executed frame (deterministic fallback)."""

    def __init__(self, robot_spec: SkeletonSpec):
        self.robot_spec = robot_spec

    def angles_for(self, window: list[MotionFrame]) -> np.ndarray:
        target = window[-1]
        seq = MotionSequence(self.robot_spec, (target,), fps=1000.0)
        result = skeleton_to_pose_ik(seq, self.robot_spec)
        return result.poses[-1].angles


class LearnedRetargeter:
    def __init__(self, model: OnlineRetargeter, robot_spec: SkeletonSpec):
        self.model = model
        self.robot_spec = robot_spec

    def angles_for(self, window: list[MotionFrame]) -> np.ndarray:
        from ..retarget.online import online_retarget

        frames = list(window)
        while len(frames) < 3:  # bidirectional context needs three frames
            frames.insert(0, frames[0])
        t0 = frames[0].timestamp
        fixed = tuple(
            MotionFrame(f.joint_positions, f.root, t0 + i * 0.1)
            for i, f in enumerate(frames)
        )
        seq = MotionSequence(self.robot_spec, fixed, fps=10.0)
        poses, _ = online_retarget(seq, self.model)
        return poses[-1].angles


class ZeroRetargeter:
    def __init__(self, joint_count: int):
        self.joint_count = joint_count

    def angles_for(self, window: list[MotionFrame]) -> np.ndarray:
        return np.zeros((self.joint_count, 3))


def payload_to_frame(payload: dict, joint_count: int) -> MotionFrame:
    joints = np.asarray(payload["joints"], dtype=np.float64)
    if joints.shape != (joint_count, 3):
        raise ProtocolError(
            f"human_frame joints must be ({joint_count}, 3), got {joints.shape}"
        )
    root = payload.get("root", {})
    transform = RigidTransform(
        rotation=np.asarray(root.get("rotation", [1.0, 0, 0, 0]), dtype=np.float64),
        translation=np.asarray(root.get("translation", [0.0, 0, 0]), dtype=np.float64),
        scale=float(root.get("scale", 1.0)),
    )
    return MotionFrame(joints, transform, float(payload["timestamp"]))


def frame_to_payload(frame: MotionFrame, angles: np.ndarray) -> dict:
    return {
        "timestamp": frame.timestamp,
        "joints": frame.joint_positions.tolist(),
        "root": {
            "rotation": frame.root.rotation.tolist(),
            "translation": frame.root.translation.tolist(),
            "scale": frame.root.scale,
        },
        "angles": angles.tolist(),
        "frame_type": "executed",
    }


class SessionPipeline:
    """The five stage workers for one session."""

    def __init__(
        self,
        human_spec: SkeletonSpec,
        stepper: Stepper,
        retargeter: Retargeter,
        binding: SurfaceBinding | None = None,
        vertex_count: int = 64,
        queue_depth: int = 4,
        retarget_window: int = 4,
        effector_indices: list[int] | None = None,
    ):
        self.human_spec = human_spec
        self.stepper = stepper
        self.retargeter = retargeter
        self.effector_indices = effector_indices or []
        self.binding = binding or build_binding(human_spec, vertex_count)
        self.intake = BoundedQueue(queue_depth, drop_oldest=True)
        self.q_decoded = BoundedQueue(queue_depth)
        self.q_surfaced = BoundedQueue(queue_depth)
        self.q_stepped = BoundedQueue(queue_depth)
        self.q_retargeted = BoundedQueue(queue_depth)
        self.out = BoundedQueue(queue_depth * 4)
        self._window: deque[MotionFrame] = deque(maxlen=retarget_window)
        self.frames_in = 0
        self.frames_out = 0
        self._tasks: list[asyncio.Task] = []

    @property
    def drops(self) -> int:
        return self.intake.drops

    def start(self) -> None:
        self._tasks = [
            asyncio.create_task(self._decode_worker()),
            asyncio.create_task(self._surface_worker()),
            asyncio.create_task(self._model_worker()),
            asyncio.create_task(self._retarget_worker()),
            asyncio.create_task(self._encode_worker()),
        ]

    async def stop(self) -> None:
        await self.intake.put(_SENTINEL)
        for t in self._tasks:
            try:
                await asyncio.wait_for(t, timeout=5.0)
            except asyncio.TimeoutError:
                t.cancel()

    async def submit(self, seq: int, payload: dict, sent_ts: float) -> None:
        self.frames_in += 1
        item = WorkItem(
            seq=seq, payload=payload, recv_ts=sent_ts, arrived=time.perf_counter()
        )
        await self.intake.put(item)

    async def _run_stage(self, name, inq, outq, fn) -> None:
        while True:
            item = await inq.get()
            if item is _SENTINEL:
                await outq.put(_SENTINEL)
                return
            t0 = time.perf_counter()
            fn(item)
            item.timings[name] = (t0, time.perf_counter())
            await outq.put(item)

    async def _decode_worker(self):
        def fn(item: WorkItem):
            item.frame = payload_to_frame(item.payload, self.human_spec.joint_count)

        await self._run_stage("decode", self.intake, self.q_decoded, fn)

    async def _surface_worker(self):
        def fn(item: WorkItem):
            item.surface = pose_binding(self.binding, item.frame, self.human_spec)

        await self._run_stage("surface", self.q_decoded, self.q_surfaced, fn)

    async def _model_worker(self):
        def fn(item: WorkItem):
            item.executed = self.stepper.step(item.frame, item.surface)

        await self._run_stage("model", self.q_surfaced, self.q_stepped, fn)

    async def _retarget_worker(self):
        def fn(item: WorkItem):
            self._window.append(item.executed)
            item.angles = self.retargeter.angles_for(list(self._window))

        await self._run_stage("retarget", self.q_stepped, self.q_retargeted, fn)

    async def _encode_worker(self):
        def fn(item: WorkItem):
            payload = frame_to_payload(item.executed, item.angles)
            payload["timing_ms"] = item.stage_ms()
            payload["echo_ts"] = item.recv_ts
            payload["echo_seq"] = item.seq
            if self.effector_indices and item.surface is not None:
                hands = item.executed.joint_positions[self.effector_indices]
                d = np.linalg.norm(
                    hands[:, None, :] - item.surface.vertices[None, :, :], axis=2
                )
                payload["contact_distance"] = d.min(axis=1).tolist()
            item.payload = payload
            self.frames_out += 1

        await self._run_stage("encode", self.q_retargeted, self.out, fn)

    def stats(self) -> dict:
        return {
            "frames_in": self.frames_in,
            "frames_out": self.frames_out,
            "drops": self.drops,
        }
