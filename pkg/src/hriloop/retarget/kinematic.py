"""Deterministic kinematic retargeting oracle.

Pipeline per frame: scale the human's mapped bone vectors by the per-bone
length ratios to obtain robot joint targets in the human root frame, clamp
targets that exceed chain reach, then solve per-chain damped-least-squares
inverse kinematics under per-axis joint limits. Angle tracks are finished
with a zero-phase moving-average smoothing pass.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import RetargetError
from ..rotations import (
    angle_axis_to_quat,
    canonicalize_angle_axis,
    quat_apply,
    quat_conjugate,
    quat_multiply,
    quat_normalize,
    quat_to_angle_axis,
)
from ..skeleton import (
    MotionFrame,
    MotionSequence,
    PoseParams,
    RigidTransform,
    SkeletonSpec,
)
from .mapping import RetargetMap

DLS_DAMPING = 0.05
DLS_ITERATIONS = 20


@dataclass(frozen=True)
class RetargetResult:
    sequence: MotionSequence
    poses: tuple[PoseParams, ...]
    end_effector_errors: np.ndarray  # (T, E) meters, vs scaled (clamped) targets
    clamped: np.ndarray  # (T,) bool, any reach clamp applied that frame


class _FastSkeleton:
    """Array view of a SkeletonSpec for the IK inner loop."""

    def __init__(self, spec: SkeletonSpec):
        self.spec = spec
        self.parents = np.array(spec.parents)
        self.offsets = spec.rest_offsets()
        self.limits_min = np.stack([j.limits_min for j in spec.joints])
        self.limits_max = np.stack([j.limits_max for j in spec.joints])
        self.count = spec.joint_count
        self.children: list[list[int]] = [[] for _ in range(self.count)]
        for i, p in enumerate(self.parents):
            if p >= 0:
                self.children[p].append(i)

    def fk(self, local_quats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Root-local FK: root joint pinned at the origin with identity
        world alignment (the root transform is applied by the caller)."""
        pos = np.zeros((self.count, 3))
        orient = np.zeros((self.count, 4))
        orient[0] = local_quats[0]
        for i in range(1, self.count):
            p = self.parents[i]
            pos[i] = pos[p] + quat_apply(orient[p], self.offsets[i])
            orient[i] = quat_normalize(quat_multiply(orient[p], local_quats[i]))
        return pos, orient

    def refresh_subtree(
        self, joints: list[int], local_quats, pos, orient
    ) -> None:
        """Recompute positions/orientations for `joints` (topological order)
        in place, assuming their ancestors outside the list are current."""
        for i in joints:
            p = self.parents[i]
            pos[i] = pos[p] + quat_apply(orient[p], self.offsets[i])
            orient[i] = quat_normalize(quat_multiply(orient[p], local_quats[i]))


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])


def _clamp_to_limits(fast: _FastSkeleton, joint: int, quat: np.ndarray) -> np.ndarray:
    aa = canonicalize_angle_axis(quat_to_angle_axis(quat))
    clamped = np.clip(aa, fast.limits_min[joint], fast.limits_max[joint])
    return angle_axis_to_quat(clamped)


def solve_chain_dls(
    fast: _FastSkeleton,
    local_quats: np.ndarray,
    pos: np.ndarray,
    orient: np.ndarray,
    variable_joints: list[int],
    targets: dict[int, np.ndarray],
    chain_joints: list[int],
    damping: float = DLS_DAMPING,
    iterations: int = DLS_ITERATIONS,
) -> None:
    """Damped-least-squares IK over one chain, in place.

    `variable_joints` get incremental world-space rotations; residuals are
    position errors of the `targets` joints. Joint limits are enforced after
    every update.
    """
    target_joints = sorted(targets.keys())
    n = len(variable_joints)
    m = len(target_joints)
    if n == 0 or m == 0:
        return
    lam2 = damping * damping
    # ancestry[v][t]: does variable v affect target t (v strict ancestor of t)
    ancestry = np.zeros((n, m), dtype=bool)
    for vi, v in enumerate(variable_joints):
        for ti, t in enumerate(target_joints):
            a = fast.parents[t]
            while a >= 0:
                if a == v:
                    ancestry[vi, ti] = True
                    break
                a = fast.parents[a]

    controllable = ancestry.any(axis=0)
    best_residual = np.inf
    stalled = 0
    for _ in range(iterations):
        fast.refresh_subtree(chain_joints, local_quats, pos, orient)
        r = np.concatenate([targets[t] - pos[t] for t in target_joints])
        residual = float(
            np.linalg.norm(
                np.concatenate(
                    [r[3 * ti : 3 * ti + 3] for ti in range(m) if controllable[ti]]
                    or [np.zeros(0)]
                )
            )
        )
        if residual < 1e-9:
            break
        # DLS may climb transiently out of singular starts; only stop after
        # several iterations without any new best.
        if residual < best_residual - 1e-12:
            best_residual = residual
            stalled = 0
        else:
            stalled += 1
            if stalled >= 3:
                break
        jac = np.zeros((3 * m, 3 * n))
        for vi, v in enumerate(variable_joints):
            for ti, t in enumerate(target_joints):
                if ancestry[vi, ti]:
                    jac[3 * ti : 3 * ti + 3, 3 * vi : 3 * vi + 3] = -_skew(
                        pos[t] - pos[v]
                    )
        jjt = jac @ jac.T
        jjt[np.diag_indices_from(jjt)] += lam2
        delta = jac.T @ np.linalg.solve(jjt, r)
        if np.linalg.norm(delta) < 1e-10:
            break
        for vi, v in enumerate(variable_joints):
            omega = delta[3 * vi : 3 * vi + 3]
            p = fast.parents[v]
            parent_orient = orient[p] if p >= 0 else np.array([1.0, 0, 0, 0])
            omega_local = quat_apply(quat_conjugate(parent_orient), omega)
            updated = quat_multiply(angle_axis_to_quat(omega_local), local_quats[v])
            local_quats[v] = _clamp_to_limits(fast, v, quat_normalize(updated))
    fast.refresh_subtree(chain_joints, local_quats, pos, orient)


def _build_chains(fast: _FastSkeleton) -> list[tuple[int, list[int]]]:
    """Decompose the tree into (base, new-joints) chains, root-to-leaf, so
    shared trunk joints are solved exactly once."""
    leaves = [i for i in range(fast.count) if not fast.children[i]]
    solved = {0}
    chains = []
    for leaf in leaves:
        path = []
        j = leaf
        while j >= 0:
            path.append(j)
            j = fast.parents[j]
        path.reverse()
        new = [j for j in path if j not in solved]
        if not new:
            continue
        base = path[path.index(new[0]) - 1]
        chains.append((base, new))
        solved.update(new)
    return chains


def smooth_angle_tracks(angles: np.ndarray, window: int = 3) -> np.ndarray:
    """Zero-phase smoothing: moving average applied forward, then applied
    again to the time-reversed signal. Constant tracks are fixed points."""
    if angles.shape[0] < window:
        return angles.copy()

    def one_pass(x):
        pad = window // 2
        padded = np.concatenate([x[:1].repeat(pad, 0), x, x[-1:].repeat(pad, 0)])
        kernel = np.ones(window) / window
        out = np.empty_like(x)
        for t in range(x.shape[0]):
            out[t] = np.tensordot(kernel, padded[t : t + window], axes=(0, 0))
        return out

    forward = one_pass(angles)
    return one_pass(forward[::-1])[::-1]


def kinematic_retarget(
    human_seq: MotionSequence,
    retarget_map: RetargetMap,
    robot_spec: SkeletonSpec,
    human_spec: SkeletonSpec | None = None,
    smooth_window: int = 3,
) -> RetargetResult:
    """Map a human motion sequence onto a robot skeleton.

    Returns the robot sequence, per-frame pose parameters (angles within
    limits), per-frame end-effector errors against the scaled targets, and a
    per-frame flag marking reach clamping. Unreachable targets are clamped to
    the reach sphere, never silently propagated.
    """
    human_spec = human_spec or human_seq.skeleton
    retarget_map.validate(human_spec, robot_spec)
    fast = _FastSkeleton(robot_spec)
    chains = _build_chains(fast)

    human_index = {n: i for i, n in enumerate(human_spec.joint_names)}
    mapped = [
        (ri, human_index[hj])
        for ri, rj in enumerate(robot_spec.joint_names)
        for hj in [retarget_map.robot_to_human.get(rj)]
        if hj is not None
    ]
    mapped_human = dict(mapped)
    ratios = np.array(
        [retarget_map.bone_ratios.get(n, 1.0) for n in robot_spec.joint_names]
    )
    ee_indices = robot_spec.end_effector_indices
    bone_len = robot_spec.bone_lengths()

    t_count = len(human_seq)
    all_angles = np.zeros((t_count, fast.count, 3))
    roots: list[RigidTransform] = []
    ee_err = np.zeros((t_count, len(ee_indices)))
    clamped_flags = np.zeros(t_count, dtype=bool)
    local_quats = np.tile(np.array([1.0, 0, 0, 0]), (fast.count, 1))

    targets_per_frame: list[dict[int, np.ndarray]] = []
    for ti, frame in enumerate(human_seq.frames):
        root = RigidTransform(
            rotation=frame.root.rotation, translation=frame.root.translation
        )
        roots.append(root)
        inv_rot = quat_conjugate(root.rotation)
        local_h = quat_apply(inv_rot, frame.joint_positions - root.translation)

        # Bone-ratio-scaled targets, walked down the robot tree. A scaled
        # segment materially longer than the robot bone (mocap noise sits
        # well under 1%) is unreachable: clamp it to the bone length (the
        # composed effect places end effectors on the reach sphere for
        # straight-limb violations) and raise the frame flag. Sub-threshold
        # stretch is left to the least-squares solve.
        targets: dict[int, np.ndarray] = {0: np.zeros(3)}
        any_clamp = False
        for i in range(1, fast.count):
            p = fast.parents[i]
            if i not in mapped_human or p not in mapped_human:
                continue  # derived joint: keeps its rest angles
            if p not in targets:
                continue
            seg = ratios[i] * (local_h[mapped_human[i]] - local_h[mapped_human[p]])
            seg_len = np.linalg.norm(seg)
            if seg_len < 1e-12:
                seg = fast.offsets[i]
            elif seg_len > bone_len[i] * 1.01:
                seg = seg * (bone_len[i] / seg_len)
                any_clamp = True
            targets[i] = targets[p] + seg
        targets_per_frame.append(targets)
        clamped_flags[ti] = any_clamp

        pos, orient = fast.fk(local_quats)
        for _base, new in chains:
            fast.refresh_subtree(new, local_quats, pos, orient)
            chain_targets = {j: targets[j] for j in new if j in targets}
            variables = [j for j in new if fast.children[j]]
            solve_chain_dls(fast, local_quats, pos, orient, variables, chain_targets, new)
        for i in range(fast.count):
            all_angles[ti, i] = canonicalize_angle_axis(
                quat_to_angle_axis(local_quats[i])
            )
        all_angles[ti, 0] = 0.0  # root joint orientation lives in the root transform

    smoothed = smooth_angle_tracks(all_angles, smooth_window)
    lo, hi = fast.limits_min, fast.limits_max
    smoothed = np.clip(smoothed, lo[None], hi[None])

    frames = []
    poses = []
    for ti in range(t_count):
        quats = np.stack([angle_axis_to_quat(a) for a in smoothed[ti]])
        pos, _ = fast.fk(quats)
        world = quat_apply(roots[ti].rotation, pos) + roots[ti].translation
        frames.append(
            MotionFrame(world, roots[ti], human_seq.frames[ti].timestamp)
        )
        poses.append(PoseParams(smoothed[ti], roots[ti]))
        for e, je in enumerate(ee_indices):
            tgt = targets_per_frame[ti].get(je)
            if tgt is None:
                ee_err[ti, e] = np.nan
            else:
                ee_err[ti, e] = np.linalg.norm(pos[je] - tgt)

    seq = MotionSequence(robot_spec, tuple(frames), human_seq.fps)
    return RetargetResult(
        sequence=seq,
        poses=tuple(poses),
        end_effector_errors=ee_err,
        clamped=clamped_flags,
    )


def skeleton_to_pose_ik(
    robot_seq: MotionSequence, robot_spec: SkeletonSpec
) -> RetargetResult:
    """Recover pose angles from a robot's own skeleton positions (self-map)."""
    from .mapping import identity_map

    return kinematic_retarget(robot_seq, identity_map(robot_spec), robot_spec, robot_spec)
