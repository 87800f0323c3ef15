"""Bone-capsule body-surface proxy and dense hand-to-surface distance fields.

The surface proxy stands in for a skinned body mesh: a fixed number of
vertices is bound to the skeleton's bones (a bone = a joint plus its parent),
and each frame the vertices are re-posed from the joint positions, so vertex
identity is stable over time.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import assets
from .errors import ShapeError, SkeletonError
from .skeleton import MotionFrame, SkeletonSpec, _frozen

_GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))
_DEFAULT_RADIUS = 0.05


@dataclass(frozen=True)
class SurfaceBinding:
    """Deterministic vertex-to-bone assignment for one (skeleton, V) pair.

    Each vertex stores the bone it rides (index of the bone's child joint),
    its normalized position along the bone, its radial distance, and its
    angle around the bone axis.
    """

    skeleton_name: str
    bone_index: np.ndarray  # (V,) int, child-joint index of the bone
    param: np.ndarray  # (V,) in [0, 1], 0 = parent end
    radius: np.ndarray  # (V,) meters
    angle: np.ndarray  # (V,) radians around the bone axis
    quotas: dict[str, int]  # child joint name -> vertex count

    def __post_init__(self):
        object.__setattr__(self, "bone_index", _frozen(self.bone_index, dtype=np.int64))
        object.__setattr__(self, "param", _frozen(self.param))
        object.__setattr__(self, "radius", _frozen(self.radius))
        object.__setattr__(self, "angle", _frozen(self.angle))

    @property
    def vertex_count(self) -> int:
        return int(self.bone_index.shape[0])

    def to_json_dict(self) -> dict:
        return {
            "skeleton_name": self.skeleton_name,
            "bone_index": self.bone_index.tolist(),
            "param": self.param.tolist(),
            "radius": self.radius.tolist(),
            "angle": self.angle.tolist(),
            "quotas": dict(self.quotas),
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json_dict(), f)

    @classmethod
    def from_json_dict(cls, d: dict) -> "SurfaceBinding":
        return cls(
            skeleton_name=d["skeleton_name"],
            bone_index=np.array(d["bone_index"], dtype=np.int64),
            param=np.array(d["param"], dtype=np.float64),
            radius=np.array(d["radius"], dtype=np.float64),
            angle=np.array(d["angle"], dtype=np.float64),
            quotas={k: int(v) for k, v in d["quotas"].items()},
        )


@dataclass(frozen=True)
class SurfaceProxy:
    """Surface vertices for one frame, tied to the binding that produced them."""

    vertices: np.ndarray  # (V, 3) meters
    binding: SurfaceBinding

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ShapeError(f"surface vertices must be (V, 3), got {v.shape}")
        if v.shape[0] != self.binding.vertex_count:
            raise ShapeError(
                f"{v.shape[0]} vertices but binding declares {self.binding.vertex_count}"
            )
        object.__setattr__(self, "vertices", _frozen(v))

    @property
    def vertex_count(self) -> int:
        return int(self.vertices.shape[0])


def _allocate_quotas(lengths: np.ndarray, count: int) -> np.ndarray:
    """Largest-remainder apportionment proportional to bone length, with a
    minimum of one vertex per bone."""
    total = float(lengths.sum())
    raw = lengths / total * count
    base = np.floor(raw).astype(np.int64)
    base = np.maximum(base, 1)
    while base.sum() > count:  # min-1 bumps can overshoot on tiny counts
        i = int(np.argmax(base))
        base[i] -= 1
    remaining = count - int(base.sum())
    frac = raw - np.floor(raw)
    order = np.argsort(-frac, kind="stable")
    for i in range(remaining):
        base[order[i % len(order)]] += 1
    return base


def build_binding(
    spec: SkeletonSpec, count: int, radii: dict[str, float] | None = None
) -> SurfaceBinding:
    """Create the deterministic vertex binding for a skeleton.

    Vertices are spread over bones proportionally to rest bone length, placed
    at evenly spaced parameters along each bone and rotated around the bone
    axis by a golden-angle spiral at the bone's capsule radius.
    """
    if count < spec.joint_count:
        raise SkeletonError(
            f"vertex count {count} below joint count {spec.joint_count}"
        )
    if radii is None:
        radii = _default_radii(spec)
    bones = [
        i
        for i, j in enumerate(spec.joints)
        if j.parent is not None and np.linalg.norm(j.rest_offset) > 1e-9
    ]
    lengths = np.array([np.linalg.norm(spec.joints[i].rest_offset) for i in bones])
    quotas = _allocate_quotas(lengths, count)

    bone_index, param, radius, angle = [], [], [], []
    for bi, q in zip(bones, quotas):
        name = spec.joints[bi].name
        r = float(radii.get(name, _DEFAULT_RADIUS))
        for v in range(q):
            bone_index.append(bi)
            param.append((v + 0.5) / q)
            radius.append(r)
            angle.append((v * _GOLDEN_ANGLE) % (2.0 * np.pi))
    return SurfaceBinding(
        skeleton_name=spec.name,
        bone_index=np.array(bone_index, dtype=np.int64),
        param=np.array(param),
        radius=np.array(radius),
        angle=np.array(angle),
        quotas={spec.joints[b].name: int(q) for b, q in zip(bones, quotas)},
    )


def _default_radii(spec: SkeletonSpec) -> dict[str, float]:
    try:
        return assets.capsule_radii(spec.name)
    except (KeyError, FileNotFoundError):
        return {}


def _bone_frames(spec: SkeletonSpec, positions: np.ndarray) -> dict[int, tuple]:
    """Per-bone orthonormal frame (axis, b1, b2) built only from the pose, so
    it is equivariant under rigid transforms of the frame."""
    out = {}
    root_children = spec.children(0)
    for i, joint in enumerate(spec.joints):
        if joint.parent is None:
            continue
        p = joint.parent
        d = positions[i] - positions[p]
        norm = np.linalg.norm(d)
        if norm < 1e-12:
            continue
        d = d / norm
        candidates = []
        grand = spec.joints[p].parent
        if grand is not None:
            candidates.append(positions[p] - positions[grand])
        for sib in root_children:
            if sib != i:
                candidates.append(positions[sib] - positions[0])
        candidates.append(np.array([1.0, 0.0, 0.0]))  # last-resort, non-equivariant
        b1 = None
        for ref in candidates:
            c = np.cross(d, ref)
            n = np.linalg.norm(c)
            if n > 1e-8:
                b1 = c / n
                break
        if b1 is None:
            b1 = np.array([1.0, 0.0, 0.0])
        b2 = np.cross(d, b1)
        out[i] = (d, b1, b2)
    return out


def pose_binding(binding: SurfaceBinding, frame: MotionFrame, spec: SkeletonSpec) -> SurfaceProxy:
    """Evaluate the binding at one frame's joint positions (vectorized; this
    sits on the serving hot path)."""
    positions = frame.joint_positions
    frames = _bone_frames(spec, positions)
    parents = np.array(spec.parents)
    bi = binding.bone_index
    pi = parents[bi]
    base = positions[pi] + binding.param[:, None] * (positions[bi] - positions[pi])
    j = spec.joint_count
    b1 = np.zeros((j, 3))
    b2 = np.zeros((j, 3))
    have = np.zeros(j, dtype=bool)
    for idx, (_, f1, f2) in frames.items():
        b1[idx], b2[idx], have[idx] = f1, f2, True
    radial = binding.radius[:, None] * (
        np.cos(binding.angle)[:, None] * b1[bi] + np.sin(binding.angle)[:, None] * b2[bi]
    )
    radial[~have[bi]] = 0.0
    return SurfaceProxy(vertices=base + radial, binding=binding)


def sample_body_surface(
    frame: MotionFrame,
    spec: SkeletonSpec,
    count: int,
    radii: dict[str, float] | None = None,
    binding: SurfaceBinding | None = None,
) -> SurfaceProxy:
    """Sample `count` surface vertices on the bone capsules of one frame.

    Passing the same `binding` (or just the same spec and count) across frames
    keeps vertex correspondence over time.
    """
    if frame.joint_count != spec.joint_count:
        raise SkeletonError("frame joint count does not match skeleton")
    if binding is None:
        binding = build_binding(spec, count, radii)
    elif binding.vertex_count != count:
        raise ShapeError("binding vertex count disagrees with requested count")
    return pose_binding(binding, frame, spec)


@dataclass(frozen=True)
class AffordanceField:
    """Distances from each end effector to every surface vertex over a
    horizon of future timesteps: shape (K, E, V), meters."""

    distances: np.ndarray  # (K, E, V)
    source: str  # "ground_truth" | "predicted"

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=np.float64)
        if d.ndim != 3:
            raise ShapeError(f"affordance field must be (K, E, V), got {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ShapeError("affordance distances must be finite and nonnegative")
        if self.source not in ("ground_truth", "predicted"):
            raise ValueError(f"unknown affordance source {self.source!r}")
        object.__setattr__(self, "distances", _frozen(d))

    @property
    def horizon(self) -> int:
        return int(self.distances.shape[0])

    @property
    def effector_count(self) -> int:
        return int(self.distances.shape[1])

    @property
    def vertex_count(self) -> int:
        return int(self.distances.shape[2])


def affordance_ground_truth(
    human_surfaces: list[SurfaceProxy],
    robot_frames: list[MotionFrame],
    spec: SkeletonSpec,
) -> AffordanceField:
    """Exact Euclidean distances from every robot end effector to every human
    surface vertex, per timestep."""
    if len(human_surfaces) != len(robot_frames):
        raise ShapeError(
            f"{len(human_surfaces)} surface frames vs {len(robot_frames)} robot frames"
        )
    ee = spec.end_effector_indices
    k = len(robot_frames)
    v = human_surfaces[0].vertex_count if k else 0
    dist = np.zeros((k, len(ee), v))
    for t, (surf, rf) in enumerate(zip(human_surfaces, robot_frames)):
        hands = rf.joint_positions[ee]  # (E, 3)
        diff = hands[:, None, :] - surf.vertices[None, :, :]
        dist[t] = np.linalg.norm(diff, axis=2)
    return AffordanceField(distances=dist, source="ground_truth")
