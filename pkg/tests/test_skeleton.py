import numpy as np
import pytest

from hriloop.errors import SequenceError, SkeletonError
from hriloop.rotations import (
    angle_axis_to_matrix,
    canonicalize_angle_axis,
    quat_normalize,
)
from hriloop.skeleton import (
    Joint,
    MotionFrame,
    MotionSequence,
    PoseParams,
    RigidTransform,
    SkeletonSpec,
    forward_kinematics,
    resample,
    rest_pose,
    sequence_from_positions,
)

WIDE = np.full(3, 10.0)


def chain_spec(offsets):
    joints = [Joint("j0", None, np.zeros(3), -WIDE, WIDE)]
    for i, off in enumerate(offsets):
        joints.append(Joint(f"j{i + 1}", i, np.array(off, float), -WIDE, WIDE))
    return SkeletonSpec("chain", tuple(joints), (f"j{len(offsets)}",))


class TestSkeletonSpec:
    def test_rejects_forward_parent_reference(self):
        joints = (
            Joint("a", None, np.zeros(3), -WIDE, WIDE),
            Joint("b", 2, np.ones(3), -WIDE, WIDE),
            Joint("c", 0, np.ones(3), -WIDE, WIDE),
        )
        with pytest.raises(SkeletonError):
            SkeletonSpec("bad", joints, ())

    def test_rejects_two_roots(self):
        joints = (
            Joint("a", None, np.zeros(3), -WIDE, WIDE),
            Joint("b", None, np.ones(3), -WIDE, WIDE),
        )
        with pytest.raises(SkeletonError):
            SkeletonSpec("bad", joints, ())

    def test_rejects_unknown_end_effector(self):
        joints = (Joint("a", None, np.zeros(3), -WIDE, WIDE),)
        with pytest.raises(SkeletonError):
            SkeletonSpec("bad", joints, ("nope",))

    def test_rejects_inverted_limits(self):
        with pytest.raises(SkeletonError):
            SkeletonSpec(
                "bad",
                (Joint("a", None, np.zeros(3), WIDE, -WIDE),),
                (),
            )

    def test_json_round_trip(self, human22, tmp_path):
        path = tmp_path / "h.json"
        human22.save(path)
        again = SkeletonSpec.load(path)
        assert again.joint_names == human22.joint_names
        assert again.parents == human22.parents
        np.testing.assert_allclose(again.rest_offsets(), human22.rest_offsets())


class TestForwardKinematics:
    def test_zero_pose_gives_cumulative_offsets(self, human22):
        frame = forward_kinematics(human22, rest_pose(human22))
        expected = np.zeros((human22.joint_count, 3))
        for i, joint in enumerate(human22.joints):
            if joint.parent is not None:
                expected[i] = expected[joint.parent] + joint.rest_offset
        np.testing.assert_allclose(frame.joint_positions, expected, atol=1e-12)

    def test_root_translation_equivariance(self, human22):
        d = np.array([0.3, -1.2, 2.5])
        base = forward_kinematics(human22, rest_pose(human22))
        moved = forward_kinematics(
            human22, rest_pose(human22, RigidTransform(translation=d))
        )
        np.testing.assert_allclose(
            moved.joint_positions, base.joint_positions + d, atol=1e-12
        )

    def test_two_joint_chain_right_angle(self):
        # root -> a (offset z+1, rotated 90 deg about x) -> b (offset z+1).
        # The rotated second segment maps (0,0,1) to (0,-1,0), so b sits at
        # (0,-1,1) relative to the root.
        spec = chain_spec([(0, 0, 1), (0, 0, 1)])
        angles = np.zeros((3, 3))
        angles[1] = [np.pi / 2, 0, 0]
        frame = forward_kinematics(spec, PoseParams(angles, RigidTransform.identity()))
        np.testing.assert_allclose(frame.joint_positions[1], [0, 0, 1], atol=1e-12)
        np.testing.assert_allclose(frame.joint_positions[2], [0, -1, 1], atol=1e-12)

    def test_determinism_bitwise(self, human22, rng):
        angles = rng.uniform(-1, 1, (human22.joint_count, 3))
        pose = PoseParams(angles, RigidTransform.identity())
        a = forward_kinematics(human22, pose).joint_positions
        b = forward_kinematics(human22, pose).joint_positions
        assert np.array_equal(a, b)

    def test_joint_count_mismatch_rejected(self, human22):
        with pytest.raises(SkeletonError):
            forward_kinematics(
                human22, PoseParams(np.zeros((3, 3)), RigidTransform.identity())
            )

    def test_non_finite_pose_rejected(self):
        with pytest.raises(SkeletonError):
            PoseParams(np.full((2, 3), np.nan), RigidTransform.identity())


class TestCanonicalizeAngleAxis:
    def test_wraps_large_angle_to_opposite_axis(self):
        axis = np.array([1.0, 0.0, 0.0])
        theta = 0.7
        v = axis * (2 * np.pi - theta)
        out = canonicalize_angle_axis(v)
        np.testing.assert_allclose(out, -axis * theta, atol=1e-12)

    def test_zero_is_fixed_point(self):
        np.testing.assert_array_equal(canonicalize_angle_axis(np.zeros(3)), np.zeros(3))

    def test_rotation_preserved_on_random_vectors(self, rng):
        for _ in range(200):
            v = rng.normal(0, 3.0, 3)
            out = canonicalize_angle_axis(v)
            assert np.linalg.norm(out) <= np.pi + 1e-12
            np.testing.assert_allclose(
                angle_axis_to_matrix(v), angle_axis_to_matrix(out), atol=1e-9
            )


class TestMotionSequence:
    def test_bad_timestamp_spacing_rejected(self, human22):
        frames = [
            MotionFrame(np.zeros((22, 3)), RigidTransform.identity(), t)
            for t in (0.0, 0.1, 0.3)
        ]
        with pytest.raises(SequenceError):
            MotionSequence(human22, tuple(frames), fps=10)

    def test_mixed_joint_counts_rejected(self, human22):
        frames = (
            MotionFrame(np.zeros((22, 3)), RigidTransform.identity(), 0.0),
            MotionFrame(np.zeros((21, 3)), RigidTransform.identity(), 0.1),
        )
        with pytest.raises(SequenceError):
            MotionSequence(human22, frames, fps=10)


def linear_sequence(spec, fps, count, velocity):
    pos0 = forward_kinematics(spec, rest_pose(spec)).joint_positions
    positions = np.stack([pos0 + (i / fps) * velocity for i in range(count)])
    roots = [
        RigidTransform(translation=(i / fps) * velocity) for i in range(count)
    ]
    return sequence_from_positions(spec, positions, fps, roots)


class TestResample:
    def test_40_to_10_hits_every_fourth_frame(self, human22, rng):
        positions = rng.normal(0, 1, (40, 22, 3))
        seq = sequence_from_positions(human22, positions, fps=40)
        out = resample(seq, 10)
        assert len(out) == 10
        for i, frame in enumerate(out.frames):
            np.testing.assert_allclose(
                frame.joint_positions, positions[4 * i], atol=1e-9
            )

    def test_identity_when_fps_unchanged(self, human22, rng):
        seq = sequence_from_positions(human22, rng.normal(0, 1, (7, 22, 3)), fps=10)
        assert resample(seq, 10) is seq

    def test_upsampling_rejected(self, human22):
        seq = sequence_from_positions(human22, np.zeros((5, 22, 3)), fps=10)
        with pytest.raises(SequenceError):
            resample(seq, 30)

    def test_linear_root_motion_interpolates_exactly(self, human22):
        # 30 fps, 31 frames (1 second), constant velocity: every resampled
        # root must land exactly on the analytic line v * t.
        v = np.array([0.5, 0.0, -0.25])
        seq = linear_sequence(human22, fps=30, count=31, velocity=v)
        out = resample(seq, 10)
        assert len(out) == 11
        for i, frame in enumerate(out.frames):
            t = i / 10
            np.testing.assert_allclose(frame.root.translation, v * t, atol=1e-9)
            np.testing.assert_allclose(
                frame.joint_positions,
                seq.frames[0].joint_positions + v * t,
                atol=1e-9,
            )

    def test_resample_twice_is_identity(self, human22, rng):
        seq = sequence_from_positions(human22, rng.normal(0, 1, (40, 22, 3)), fps=40)
        once = resample(seq, 10)
        twice = resample(once, 10)
        assert twice is once

    def test_frame_count_formula(self, human22):
        # 8 seconds at 40 fps -> floor(8 * 10) + 1 frames at 10 fps.
        seq = sequence_from_positions(human22, np.zeros((321, 22, 3)), fps=40)
        assert len(resample(seq, 10)) == 81


class TestRigidTransform:
    def test_rejects_non_unit_quaternion(self):
        with pytest.raises(ValueError):
            RigidTransform(rotation=np.array([1.0, 1.0, 0.0, 0.0]))

    def test_rejects_non_positive_scale(self):
        with pytest.raises(ValueError):
            RigidTransform(scale=0.0)

    def test_compose_matches_sequential_apply(self, rng):
        a = RigidTransform(
            rotation=quat_normalize(rng.normal(0, 1, 4)),
            translation=rng.normal(0, 1, 3),
            scale=1.7,
        )
        b = RigidTransform(
            rotation=quat_normalize(rng.normal(0, 1, 4)),
            translation=rng.normal(0, 1, 3),
            scale=0.4,
        )
        pts = rng.normal(0, 1, (10, 3))
        np.testing.assert_allclose(
            a.compose(b).apply(pts), a.apply(b.apply(pts)), atol=1e-12
        )
