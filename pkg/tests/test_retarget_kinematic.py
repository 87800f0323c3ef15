import numpy as np
import pytest
from scipy.optimize import minimize

from hriloop.retarget import (
    identity_map,
    kinematic_retarget,
    load_shipped_map,
    smooth_angle_tracks,
)
from hriloop.retarget.kinematic import _FastSkeleton, solve_chain_dls
from hriloop.errors import RetargetError
from hriloop.rotations import quat_apply
from hriloop.skeleton import (
    Joint,
    MotionFrame,
    MotionSequence,
    RigidTransform,
    SkeletonSpec,
    forward_kinematics,
    rest_pose,
    sequence_from_positions,
)

Z_ONLY_MIN = np.array([0.0, 0.0, -np.pi])
Z_ONLY_MAX = np.array([0.0, 0.0, np.pi])
LINKS = (0.3, 0.25, 0.2)


def planar_arm_spec():
    joints = [
        Joint("base", None, np.zeros(3), np.zeros(3), np.zeros(3)),
        Joint("j1", 0, np.zeros(3), Z_ONLY_MIN, Z_ONLY_MAX),
        Joint("j2", 1, np.array([LINKS[0], 0, 0]), Z_ONLY_MIN, Z_ONLY_MAX),
        Joint("j3", 2, np.array([LINKS[1], 0, 0]), Z_ONLY_MIN, Z_ONLY_MAX),
        Joint("tip", 3, np.array([LINKS[2], 0, 0]), np.zeros(3), np.zeros(3)),
    ]
    return SkeletonSpec("planar3", tuple(joints), ("tip",))


def planar_end(thetas):
    a = np.cumsum(thetas)
    return np.array(
        [
            np.sum([l * np.cos(ai) for l, ai in zip(LINKS, a)]),
            np.sum([l * np.sin(ai) for l, ai in zip(LINKS, a)]),
            0.0,
        ]
    )


def grid_search_ik(target, resolution=40):
    """Brute-force oracle: dense grid over the three z-angles, refined with a
    local optimizer. Returns the best reachable end position."""
    grid = np.linspace(-np.pi, np.pi, resolution, endpoint=False)
    t1, t2, t3 = np.meshgrid(grid, grid, grid, indexing="ij")
    a1 = t1
    a2 = t1 + t2
    a3 = a2 + t3
    x = LINKS[0] * np.cos(a1) + LINKS[1] * np.cos(a2) + LINKS[2] * np.cos(a3)
    y = LINKS[0] * np.sin(a1) + LINKS[1] * np.sin(a2) + LINKS[2] * np.sin(a3)
    err = (x - target[0]) ** 2 + (y - target[1]) ** 2
    best = np.unravel_index(np.argmin(err), err.shape)
    x0 = np.array([grid[best[0]], grid[best[1]], grid[best[2]]])
    res = minimize(
        lambda th: np.sum((planar_end(th) - target) ** 2),
        x0,
        method="Nelder-Mead",
        options={"xatol": 1e-12, "fatol": 1e-16, "maxiter": 5000},
    )
    return planar_end(res.x), np.sqrt(res.fun)


def run_dls(spec, target, iterations=80):
    fast = _FastSkeleton(spec)
    quats = np.tile(np.array([1.0, 0, 0, 0]), (spec.joint_count, 1))
    pos, orient = fast.fk(quats)
    solve_chain_dls(
        fast, quats, pos, orient,
        variable_joints=[1, 2, 3],
        targets={4: np.asarray(target, float)},
        chain_joints=[1, 2, 3, 4],
        iterations=iterations,
    )
    return pos[4]


class TestDlsAgainstGridSearch:
    def test_reachable_targets_match_oracle(self):
        spec = planar_arm_spec()
        rng = np.random.default_rng(11)
        for _ in range(6):
            radius = rng.uniform(0.25, 0.7)
            phi = rng.uniform(-np.pi, np.pi)
            target = np.array([radius * np.cos(phi), radius * np.sin(phi), 0.0])
            oracle_end, oracle_err = grid_search_ik(target)
            assert oracle_err < 1e-6  # target really is reachable
            end = run_dls(spec, target)
            assert np.linalg.norm(end - target) < 1e-3


@pytest.fixture(scope="module")
def h1_map(unitree_h1):
    return identity_map(unitree_h1)


def h1_rest_sequence(unitree_h1, frames=5, fps=10.0):
    rest = forward_kinematics(unitree_h1, rest_pose(unitree_h1))
    positions = np.stack([rest.joint_positions] * frames)
    return sequence_from_positions(unitree_h1, positions, fps)


class TestKinematicRetarget:
    def test_rest_round_trip_zero_angles(self, unitree_h1, h1_map):
        seq = h1_rest_sequence(unitree_h1)
        result = kinematic_retarget(seq, h1_map, unitree_h1, unitree_h1)
        for pose in result.poses:
            np.testing.assert_allclose(pose.angles, 0.0, atol=1e-9)
        for got, want in zip(result.sequence.frames, seq.frames):
            assert np.abs(got.joint_positions - want.joint_positions).max() < 1e-6
        assert not result.clamped.any()

    def test_beyond_reach_clamps_to_sphere_with_flag(self, unitree_h1, h1_map):
        rest = forward_kinematics(unitree_h1, rest_pose(unitree_h1))
        shoulder = unitree_h1.joint_index("left_shoulder")
        elbow = unitree_h1.joint_index("left_elbow")
        wrist = unitree_h1.joint_index("left_wrist")
        stretched = rest.joint_positions.copy()
        stretched[elbow] = stretched[shoulder] + 2 * (
            rest.joint_positions[elbow] - rest.joint_positions[shoulder]
        )
        stretched[wrist] = stretched[elbow] + 2 * (
            rest.joint_positions[wrist] - rest.joint_positions[elbow]
        )
        seq = sequence_from_positions(unitree_h1, np.stack([stretched] * 4), 10.0)
        result = kinematic_retarget(seq, h1_map, unitree_h1, unitree_h1)
        assert result.clamped.all()
        arm_reach = sum(
            np.linalg.norm(unitree_h1.joints[j].rest_offset) for j in (elbow, wrist)
        )
        for frame in result.sequence.frames:
            d = np.linalg.norm(frame.joint_positions[wrist] - frame.joint_positions[shoulder])
            assert abs(d - arm_reach) < 1e-3
        assert not np.isnan(result.sequence.positions()).any()

    def test_outputs_respect_joint_limits(self, unitree_h1, human22):
        from hriloop.data.synth import generate_pair
        from hriloop.skeleton import resample

        rmap = load_shipped_map("human22", "unitree_h1")
        for action in ("high-five", "hug"):
            pair = generate_pair(action, seed=5)
            result = kinematic_retarget(
                resample(pair.reactor, 10), rmap, unitree_h1, human22
            )
            for pose in result.poses:
                assert pose.within_limits(unitree_h1)

    def test_commutes_with_global_yaw(self, unitree_h1, human22):
        from hriloop.data.synth import generate_pair
        from hriloop.skeleton import resample

        rmap = load_shipped_map("human22", "unitree_h1")
        pair = generate_pair("handshake", seed=2)
        seq = resample(pair.reactor, 10)
        yaw = 0.9
        q = np.array([np.cos(yaw / 2), 0.0, np.sin(yaw / 2), 0.0])
        tf = RigidTransform(rotation=q)

        rotated_frames = tuple(
            MotionFrame(
                quat_apply(q, f.joint_positions),
                RigidTransform(
                    rotation=tf.compose(f.root).rotation,
                    translation=quat_apply(q, f.root.translation),
                ),
                f.timestamp,
            )
            for f in seq.frames
        )
        rotated = MotionSequence(human22, rotated_frames, seq.fps)

        base = kinematic_retarget(seq, rmap, unitree_h1, human22)
        moved = kinematic_retarget(rotated, rmap, unitree_h1, human22)
        for fb, fm in zip(base.sequence.frames, moved.sequence.frames):
            np.testing.assert_allclose(
                fm.joint_positions, quat_apply(q, fb.joint_positions), atol=1e-6
            )
            # Root orientation differs by exactly the applied yaw.
            expected = tf.compose(fb.root).rotation
            assert (
                np.abs(fm.root.rotation - expected).max() < 1e-6
                or np.abs(fm.root.rotation + expected).max() < 1e-6
            )

    def test_wrong_map_rejected(self, unitree_h1, human22):
        seq = h1_rest_sequence(unitree_h1)
        with pytest.raises(RetargetError):
            kinematic_retarget(seq, identity_map(human22), unitree_h1, unitree_h1)


class TestSmoothing:
    def test_constant_track_unchanged(self):
        x = np.ones((10, 4, 3)) * 0.7
        np.testing.assert_allclose(smooth_angle_tracks(x), x, atol=1e-12)

    def test_short_sequence_passthrough(self):
        x = np.random.default_rng(0).normal(size=(2, 3, 3))
        np.testing.assert_array_equal(smooth_angle_tracks(x), x)

    def test_reduces_high_frequency_energy(self, rng):
        t = np.arange(50)
        noisy = np.sin(0.2 * t)[:, None, None] + rng.normal(0, 0.3, (50, 1, 1))
        smooth = smooth_angle_tracks(noisy)
        assert np.std(np.diff(smooth, axis=0)) < np.std(np.diff(noisy, axis=0))
