"""Skeleton, pose, and motion-sequence value types plus forward kinematics.

All types are immutable values: numpy payloads are copied on construction
and flagged read-only, so instances are safe to share across threads and
async tasks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import SequenceError, SkeletonError
from .rotations import (
    IDENTITY_QUAT,
    angle_axis_to_quat,
    quat_apply,
    quat_multiply,
    quat_normalize,
    quat_slerp,
)

_TIME_TOL = 1e-6


def _frozen(a: np.ndarray, dtype=np.float64) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Joint:
    """One joint: parent index (None for the root), rest offset from the
    parent in meters, and per-axis angle limits in radians."""

    name: str
    parent: int | None
    rest_offset: np.ndarray  # (3,)
    limits_min: np.ndarray  # (3,)
    limits_max: np.ndarray  # (3,)

    def __post_init__(self):
        object.__setattr__(self, "rest_offset", _frozen(self.rest_offset))
        object.__setattr__(self, "limits_min", _frozen(self.limits_min))
        object.__setattr__(self, "limits_max", _frozen(self.limits_max))


@dataclass(frozen=True)
class SkeletonSpec:
    """Named joint tree with rest offsets, limits, and end-effector joints.

    Joints are topologically ordered: a joint's parent index is always
    smaller than its own index, and exactly the first joint is the root.
    """

    name: str
    joints: tuple[Joint, ...]
    end_effectors: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "end_effectors", tuple(self.end_effectors))
        self._validate()

    def _validate(self) -> None:
        names = [j.name for j in self.joints]
        if len(set(names)) != len(names):
            raise SkeletonError(f"duplicate joint names in skeleton {self.name!r}")
        roots = [i for i, j in enumerate(self.joints) if j.parent is None]
        if roots != [0]:
            raise SkeletonError(
                f"skeleton {self.name!r} must have exactly one root at index 0, got {roots}"
            )
        for i, j in enumerate(self.joints):
            if j.parent is not None and not (0 <= j.parent < i):
                raise SkeletonError(
                    f"joint {j.name!r} (index {i}) has parent {j.parent}; "
                    "parents must precede children"
                )
            if np.any(j.limits_min > j.limits_max):
                raise SkeletonError(f"joint {j.name!r} has min limit above max")
        for ee in self.end_effectors:
            if ee not in names:
                raise SkeletonError(f"end effector {ee!r} not a joint of {self.name!r}")

    @property
    def joint_count(self) -> int:
        return len(self.joints)

    @property
    def joint_names(self) -> list[str]:
        return [j.name for j in self.joints]

    @property
    def parents(self) -> list[int]:
        return [-1 if j.parent is None else j.parent for j in self.joints]

    def joint_index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise SkeletonError(f"no joint named {name!r} in skeleton {self.name!r}")

    @property
    def end_effector_indices(self) -> list[int]:
        return [self.joint_index(n) for n in self.end_effectors]

    def rest_offsets(self) -> np.ndarray:
        return np.stack([j.rest_offset for j in self.joints])

    def bone_lengths(self) -> np.ndarray:
        """Per-joint distance to its parent; 0 for the root."""
        return np.linalg.norm(self.rest_offsets(), axis=1)

    def children(self, index: int) -> list[int]:
        return [i for i, j in enumerate(self.joints) if j.parent == index]

    def to_json_dict(self) -> dict:
        return {
            "name": self.name,
            "joints": [
                {
                    "name": j.name,
                    "parent": j.parent,
                    "rest_offset": j.rest_offset.tolist(),
                    "limits_min": j.limits_min.tolist(),
                    "limits_max": j.limits_max.tolist(),
                }
                for j in self.joints
            ],
            "end_effectors": list(self.end_effectors),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SkeletonSpec":
        joints = tuple(
            Joint(
                name=j["name"],
                parent=j["parent"],
                rest_offset=np.array(j["rest_offset"], dtype=np.float64),
                limits_min=np.array(j["limits_min"], dtype=np.float64),
                limits_max=np.array(j["limits_max"], dtype=np.float64),
            )
            for j in d["joints"]
        )
        return cls(name=d["name"], joints=joints, end_effectors=tuple(d["end_effectors"]))

    @classmethod
    def load(cls, path: str | Path) -> "SkeletonSpec":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json_dict(json.load(f))

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(), f, indent=2)


@dataclass(frozen=True)
class RigidTransform:
    """Similarity transform: unit quaternion rotation, translation, scale."""

    rotation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())  # (4,) wxyz
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))  # (3,)
    scale: float = 1.0

    def __post_init__(self):
        rot = np.asarray(self.rotation, dtype=np.float64)
        if abs(np.linalg.norm(rot) - 1.0) > 1e-9:
            raise ValueError("rotation quaternion must be unit norm")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "rotation", _frozen(rot))
        object.__setattr__(self, "translation", _frozen(self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return self.scale * quat_apply(self.rotation, points) + self.translation

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """Transform equivalent to applying `other` first, then self."""
        return RigidTransform(
            rotation=quat_normalize(quat_multiply(self.rotation, other.rotation)),
            translation=self.apply(other.translation),
            scale=self.scale * other.scale,
        )

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()


@dataclass(frozen=True)
class MotionFrame:
    """World-frame joint positions plus the root transform at one instant."""

    joint_positions: np.ndarray  # (J, 3) meters
    root: RigidTransform
    timestamp: float

    def __post_init__(self):
        pos = np.asarray(self.joint_positions, dtype=np.float64)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise SkeletonError(f"joint positions must be (J, 3), got {pos.shape}")
        if not np.all(np.isfinite(pos)):
            raise SkeletonError("joint positions must be finite")
        object.__setattr__(self, "joint_positions", _frozen(pos))

    @property
    def joint_count(self) -> int:
        return self.joint_positions.shape[0]


@dataclass(frozen=True)
class MotionSequence:
    """Fixed-FPS ordered frames sharing one skeleton."""

    skeleton: SkeletonSpec
    frames: tuple[MotionFrame, ...]
    fps: float

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        if self.fps <= 0:
            raise SequenceError("fps must be positive")
        counts = {f.joint_count for f in self.frames}
        if len(counts) > 1:
            raise SequenceError(f"frames disagree on joint count: {sorted(counts)}")
        if self.frames and self.frames[0].joint_count != self.skeleton.joint_count:
            raise SequenceError(
                f"frames have {self.frames[0].joint_count} joints, "
                f"skeleton {self.skeleton.name!r} has {self.skeleton.joint_count}"
            )
        step = 1.0 / self.fps
        for a, b in zip(self.frames, self.frames[1:]):
            if abs((b.timestamp - a.timestamp) - step) > _TIME_TOL:
                raise SequenceError(
                    f"timestamps must advance by 1/fps: {a.timestamp} -> {b.timestamp}"
                )

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def duration(self) -> float:
        if len(self.frames) < 2:
            return 0.0
        return self.frames[-1].timestamp - self.frames[0].timestamp

    def positions(self) -> np.ndarray:
        """Stacked joint positions, shape (T, J, 3)."""
        return np.stack([f.joint_positions for f in self.frames])

    def root_translations(self) -> np.ndarray:
        return np.stack([f.root.translation for f in self.frames])

    def root_rotations(self) -> np.ndarray:
        return np.stack([f.root.rotation for f in self.frames])

    def slice(self, start: int, stop: int) -> "MotionSequence":
        return MotionSequence(self.skeleton, self.frames[start:stop], self.fps)


@dataclass(frozen=True)
class PoseParams:
    """Per-joint angle-axis rotations (J, 3) plus a root transform."""

    angles: np.ndarray  # (J, 3) radians, angle-axis
    root: RigidTransform

    def __post_init__(self):
        a = np.asarray(self.angles, dtype=np.float64)
        if a.ndim != 2 or a.shape[1] != 3:
            raise SkeletonError(f"pose angles must be (J, 3), got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise SkeletonError("pose angles must be finite")
        object.__setattr__(self, "angles", _frozen(a))

    @property
    def joint_count(self) -> int:
        return self.angles.shape[0]

    def within_limits(self, spec: SkeletonSpec, tol: float = 1e-9) -> bool:
        lo = np.stack([j.limits_min for j in spec.joints])
        hi = np.stack([j.limits_max for j in spec.joints])
        return bool(np.all(self.angles >= lo - tol) and np.all(self.angles <= hi + tol))


def forward_kinematics(
    spec: SkeletonSpec, pose: PoseParams, timestamp: float = 0.0
) -> MotionFrame:
    """Compute world joint positions from angle-axis pose parameters.

    Each joint's local rotation is applied about its own origin; offsets are
    accumulated root-down. The root transform scale also scales the skeleton.
    """
    if pose.joint_count != spec.joint_count:
        raise SkeletonError(
            f"pose has {pose.joint_count} joints, skeleton {spec.name!r} "
            f"has {spec.joint_count}"
        )
    positions, _ = _fk_arrays(spec, pose.angles, pose.root)
    return MotionFrame(joint_positions=positions, root=pose.root, timestamp=timestamp)


def _fk_arrays(
    spec: SkeletonSpec, angles: np.ndarray, root: RigidTransform
) -> tuple[np.ndarray, np.ndarray]:
    """FK returning (positions (J,3), global orientations (J,4))."""
    j = spec.joint_count
    positions = np.zeros((j, 3))
    orientations = np.zeros((j, 4))
    for i, joint in enumerate(spec.joints):
        local_q = angle_axis_to_quat(angles[i])
        if joint.parent is None:
            orientations[i] = quat_normalize(quat_multiply(root.rotation, local_q))
            positions[i] = root.translation
        else:
            p = joint.parent
            positions[i] = positions[p] + root.scale * quat_apply(
                orientations[p], joint.rest_offset
            )
            orientations[i] = quat_normalize(quat_multiply(orientations[p], local_q))
    return positions, orientations


def rest_pose(spec: SkeletonSpec, root: RigidTransform | None = None) -> PoseParams:
    return PoseParams(
        angles=np.zeros((spec.joint_count, 3)),
        root=root if root is not None else RigidTransform.identity(),
    )


def resample(seq: MotionSequence, target_fps: float) -> MotionSequence:
    """Resample to a lower fps: positions linearly, rotations spherically.

    Output frame count is floor(duration * target_fps) + 1, with the first
    frame'a timestamp preserved. Upsampling is out of contract.
    """
    if target_fps > seq.fps + _TIME_TOL:
        raise SequenceError(
            f"cannot resample {seq.fps} fps up to {target_fps} fps (upsampling)"
        )
    if abs(target_fps - seq.fps) <= _TIME_TOL:
        return seq
    if not seq.frames:
        return MotionSequence(seq.skeleton, (), target_fps)
    t0 = seq.frames[0].timestamp
    count = int(np.floor(seq.duration * target_fps + _TIME_TOL)) + 1
    out: list[MotionFrame] = []
    for i in range(count):
        t = t0 + i / target_fps
        out.append(_interpolate_frame(seq, t))
    return MotionSequence(seq.skeleton, tuple(out), target_fps)


def _interpolate_frame(seq: MotionSequence, t: float) -> MotionFrame:
    src_t0 = seq.frames[0].timestamp
    pos = (t - src_t0) * seq.fps
    lo = int(np.floor(pos + _TIME_TOL))
    lo = min(max(lo, 0), len(seq.frames) - 1)
    alpha = pos - lo
    if alpha <= _TIME_TOL or lo == len(seq.frames) - 1:
        f = seq.frames[lo]
        return MotionFrame(f.joint_positions, f.root, t)
    a, b = seq.frames[lo], seq.frames[lo + 1]
    joints = (1 - alpha) * a.joint_positions + alpha * b.joint_positions
    root = RigidTransform(
        rotation=quat_slerp(a.root.rotation, b.root.rotation, alpha),
        translation=(1 - alpha) * a.root.translation + alpha * b.root.translation,
        scale=(1 - alpha) * a.root.scale + alpha * b.root.scale,
    )
    return MotionFrame(joints, root, t)


def sequence_from_positions(
    spec: SkeletonSpec,
    positions: np.ndarray,
    fps: float,
    roots: list[RigidTransform] | None = None,
    t0: float = 0.0,
) -> MotionSequence:
    """Build a sequence from a (T, J, 3) position array."""
    frames = []
    for i in range(positions.shape[0]):
        root = roots[i] if roots is not None else RigidTransform.identity()
        frames.append(MotionFrame(positions[i], root, t0 + i / fps))
    return MotionSequence(spec, tuple(frames), fps)
